mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use timebucket::adversary::{run_attack, AttackPlan, TimingStrategy};
use timebucket::{CostBound, Ledger, LedgerOp, Operation, ResourceConfig};

#[test]
fn supply_changes_only_by_mint_burn_and_expiry() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let resource = common::res("r");
    for trial in 0..40u64 {
        let config = ResourceConfig::new(500 + trial * 113, 1 + trial % 7).unwrap();
        let accounts = common::accounts(4);
        let mut ledger: Ledger = Ledger::new();
        let mut supply = 0u128;
        for op in common::random_trace(&mut rng, &config, &accounts, 2_000) {
            let before = ledger.clone();
            let clock = ledger.clock();
            let result = op.apply(&mut ledger);
            let after = if ledger.resources().next().is_some() { ledger.total_supply(&resource).unwrap() } else { 0 };
            match (&op, &result) {
                (_, Err(_)) => {
                    assert_eq!(ledger, before, "failed op mutated state: {op}");
                    continue;
                }
                (LedgerOp::Mint { amount, .. }, Ok(_)) => assert_eq!(after, supply + amount),
                (LedgerOp::Burn { amount, .. }, Ok(_)) => assert_eq!(after, supply - amount),
                (LedgerOp::Advance(_), Ok(_)) => {
                    assert!(after <= supply);
                    assert!(ledger.clock() >= clock);
                }
                (_, Ok(_)) => assert_eq!(after, supply, "{op}"),
            }
            supply = after;
            for (_, _, book) in ledger.books() {
                assert!(!book.is_empty());
                book.check_invariants().unwrap();
                for r in book.records() {
                    assert_eq!(r.expires_at.secs() % config.bucket_width(), 0);
                }
            }
        }
    }
}

fn strategy() -> impl Strategy<Value = TimingStrategy> {
    prop_oneof![
        Just(TimingStrategy::SameBucket),
        Just(TimingStrategy::SpreadAcrossBuckets),
        Just(TimingStrategy::RandomTimes),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attacks_never_exceed_bound(
        deposits in 1u64..2_000,
        amount in 1u64..1_000,
        funding in 0u64..100,
        timing in strategy(),
        ttl in 1u64..1_000_000,
        k in 1u64..150,
        seed in any::<u64>(),
    ) {
        let config = ResourceConfig::new(ttl, k).unwrap();
        let plan = AttackPlan::new(deposits, amount, timing).with_funding(funding);
        let report = run_attack(&plan, &config, seed).unwrap();
        prop_assert!(report.record_count_after <= report.bound);
        prop_assert_eq!(report.bound as u64, k + 1);
        prop_assert!(CostBound::for_operation(Operation::Consume).admits(&report.victim_burn_cost, k));
        prop_assert!(CostBound::for_operation(Operation::Transfer).admits(&report.victim_transfer_cost, k));
        if timing == TimingStrategy::SameBucket {
            prop_assert!(report.record_count_after <= report.record_count_before + 1);
        }
        prop_assert_eq!(run_attack(&plan, &config, seed).unwrap(), report);
    }
}

#[test]
fn saturated_spread_attack_costs_stop_growing() {
    let config = ResourceConfig::new(30 * 86_400, 100).unwrap();
    let small = run_attack(&AttackPlan::<u64>::new(500, 1, TimingStrategy::SpreadAcrossBuckets), &config, 1).unwrap();
    let large = run_attack(&AttackPlan::<u64>::new(5_000, 1, TimingStrategy::SpreadAcrossBuckets), &config, 1).unwrap();
    assert_eq!(small.record_count_after, large.record_count_after);
    assert_eq!(small.victim_burn_cost, large.victim_burn_cost);
    assert_eq!(small.victim_transfer_cost, large.victim_transfer_cost);
}
