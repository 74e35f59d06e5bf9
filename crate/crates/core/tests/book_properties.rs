//! Randomized invariant suites for the record book and its oracles.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use timebucket::oracle::{check_dominance, check_equivalence, DifferentialHarness, ExactExpiryBook, NaiveBucketedBook, PrunePolicy};
use timebucket::{CostBound, Operation, RecordBook, ResourceConfig, Timestamp};

#[derive(Clone, Debug)]
enum BookOp {
    Advance(u64),
    Deposit { into_second: bool, amount: u64 },
    Consume { from_second: bool, amount: u64 },
    Transfer { from_second: bool, amount: u64 },
    Prune { second: bool },
}

fn book_op(width: u64) -> impl Strategy<Value = BookOp> {
    prop_oneof![
        3 => (0..=2 * width).prop_map(BookOp::Advance),
        4 => (any::<bool>(), 1u64..30).prop_map(|(into_second, amount)| BookOp::Deposit { into_second, amount }),
        2 => (any::<bool>(), 1u64..60).prop_map(|(from_second, amount)| BookOp::Consume { from_second, amount }),
        2 => (any::<bool>(), 1u64..60).prop_map(|(from_second, amount)| BookOp::Transfer { from_second, amount }),
        1 => any::<bool>().prop_map(|second| BookOp::Prune { second }),
    ]
}

fn scenario() -> impl Strategy<Value = (ResourceConfig, Vec<BookOp>)> {
    (1u64..=5_000, 1u64..=12).prop_flat_map(|(ttl, k)| {
        let config = ResourceConfig::new(ttl, k).unwrap();
        (Just(config), prop::collection::vec(book_op(config.bucket_width()), 1..300))
    })
}

fn expiries(b: &RecordBook<u64>) -> BTreeSet<Timestamp> {
    b.records().iter().map(|r| r.expires_at).collect()
}

fn live_expiries(b: &RecordBook<u64>, now: Timestamp) -> Vec<Timestamp> {
    b.records().iter().filter(|r| r.expires_at > now).map(|r| r.expires_at).collect()
}

fn pick<'a>(books: &'a mut [RecordBook<u64>; 2], second: bool) -> (&'a mut RecordBook<u64>, &'a mut RecordBook<u64>) {
    let [a, b] = books;
    if second {
        (b, a)
    } else {
        (a, b)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn book_invariants_hold((config, ops) in scenario()) {
        let k = config.bucket_count();
        let mut books = [RecordBook::<u64>::new(config), RecordBook::<u64>::new(config)];
        let mut now = Timestamp(0);
        for op in ops {
            let before = books.clone();
            match op {
                BookOp::Advance(dt) => now = Timestamp(now.0 + dt),
                BookOp::Deposit { into_second, amount } => {
                    let (b, _) = pick(&mut books, into_second);
                    let e = config.bucketed_expiry(now).unwrap();
                    prop_assert!(e.0 >= now.0 + config.ttl());
                    let cost = b.insert(amount, e, now).unwrap();
                    prop_assert!(CostBound::for_operation(Operation::Insert).admits(&cost, k));
                    prop_assert!(cost.records_created <= cost.records_written);
                }
                BookOp::Consume { from_second, amount } => {
                    let (b, _) = pick(&mut books, from_second);
                    let balance = b.valid_balance(now).unwrap();
                    let live = live_expiries(b, now);
                    match b.consume(amount, now) {
                        Ok((slice, cost)) => {
                            prop_assert_eq!(slice.total().unwrap(), amount);
                            prop_assert!(slice.parts().iter().all(|p| p.amount > 0));
                            let taken: Vec<_> = slice.parts().iter().map(|p| p.expires_at).collect();
                            // FIFO: the slice walks a prefix of the live expiries.
                            prop_assert_eq!(&taken[..], &live[..taken.len()]);
                            prop_assert_eq!(b.valid_balance(now).unwrap(), balance - amount);
                            prop_assert!(CostBound::for_operation(Operation::Consume).admits(&cost, k));
                        }
                        Err(e) => {
                            prop_assert!(e.is_insufficient_balance());
                            prop_assert!(balance < amount);
                            prop_assert_eq!(&books, &before);
                        }
                    }
                }
                BookOp::Transfer { from_second, amount } => {
                    let (s, r) = pick(&mut books, from_second);
                    let total = s.valid_balance(now).unwrap() + r.valid_balance(now).unwrap();
                    let allowed: BTreeSet<_> = expiries(s).union(&expiries(r)).copied().collect();
                    match s.transfer(r, amount, now) {
                        Ok(cost) => {
                            prop_assert_eq!(s.valid_balance(now).unwrap() + r.valid_balance(now).unwrap(), total);
                            prop_assert!(expiries(r).is_subset(&allowed));
                            prop_assert!(CostBound::for_operation(Operation::Transfer).admits(&cost, k));
                        }
                        Err(e) => {
                            prop_assert!(e.is_insufficient_balance());
                            prop_assert_eq!(&books, &before);
                        }
                    }
                }
                BookOp::Prune { second } => {
                    let (b, _) = pick(&mut books, second);
                    let cost = b.prune(now);
                    prop_assert!(CostBound::for_operation(Operation::Prune).admits(&cost, k));
                    let once = b.clone();
                    b.prune(now);
                    prop_assert_eq!(&*b, &once);
                }
            }
            for b in &books {
                b.check_invariants().map_err(|e| TestCaseError::fail(e.to_string()))?;
                prop_assert!(b.len() as u64 <= k + 1);
                let (_, cost) = b.metered_valid_balance(now).unwrap();
                prop_assert_eq!(cost.records_visited, b.len() as u64);
                prop_assert!(CostBound::for_operation(Operation::Balance).admits(&cost, k));
            }
        }
    }

    #[test]
    fn coalesced_matches_naive_book((config, ops) in scenario()) {
        let mut c = RecordBook::<u64>::new(config);
        let mut n = NaiveBucketedBook::<u64>::new(config, PrunePolicy::Lazy);
        let mut now = Timestamp(0);
        for op in ops {
            match op {
                BookOp::Advance(dt) => now = Timestamp(now.0 + dt),
                BookOp::Deposit { amount, .. } => {
                    let e = config.bucketed_expiry(now).unwrap();
                    c.insert(amount, e, now).unwrap();
                    n.insert(amount, e, now).unwrap();
                }
                BookOp::Consume { amount, .. } | BookOp::Transfer { amount, .. } => {
                    let a = c.consume(amount, now).map(|(s, _)| timebucket::oracle::aggregate_by_expiry(s.parts()).unwrap());
                    let b = n.consume(amount, now).map(|(s, _)| timebucket::oracle::aggregate_by_expiry(&s).unwrap());
                    prop_assert_eq!(a, b);
                }
                BookOp::Prune { .. } => {
                    c.prune(now);
                    n.prune(now);
                }
            }
            prop_assert!(check_equivalence(&c, &n).is_ok());
            prop_assert_eq!(c.valid_balance(now), n.valid_balance(now));
        }
    }

    #[test]
    fn bucketed_balance_dominates_exact(
        ttl in 1u64..5_000,
        k in 1u64..12,
        steps in prop::collection::vec((0u64..400, 1u64..50, any::<bool>()), 1..200),
    ) {
        let config = ResourceConfig::new(ttl, k).unwrap();
        let mut c = RecordBook::<u64>::new(config);
        let mut e = ExactExpiryBook::<u64>::new(ttl);
        let mut now = Timestamp(0);
        for (dt, amount, deposit) in steps {
            now = Timestamp(now.0 + dt);
            if deposit {
                c.insert(amount, config.bucketed_expiry(now).unwrap(), now).unwrap();
                e.deposit(amount, now).unwrap();
            }
            prop_assert!(check_dominance(&c, &e, now));
        }
    }

    #[test]
    fn aligned_deposits_give_equal_balances(
        width in 1u64..500,
        k in 1u64..12,
        steps in prop::collection::vec((0u64..5, 1u64..50, any::<bool>()), 1..200),
    ) {
        // T = k w exactly and deposits on boundaries: t + T is always a boundary.
        let ttl = k * width;
        let config = ResourceConfig::new(ttl, k).unwrap();
        prop_assert_eq!(config.bucket_width(), width);
        let mut c = RecordBook::<u64>::new(config);
        let mut e = ExactExpiryBook::<u64>::new(ttl);
        let mut now = Timestamp(0);
        for (buckets, amount, deposit) in steps {
            now = Timestamp(now.0 + buckets * width);
            if deposit {
                c.insert(amount, config.bucketed_expiry(now).unwrap(), now).unwrap();
                e.deposit(amount, now).unwrap();
            }
            prop_assert_eq!(c.valid_balance(now), e.valid_balance(now));
            // also just before the next boundary
            let probe = Timestamp(now.0 + width - 1);
            prop_assert_eq!(c.valid_balance(probe), e.valid_balance(probe));
        }
    }
}

#[test]
fn ledger_traces_match_naive_ledger() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..50u64 {
        let config = ResourceConfig::new(1000 + trial * 37, 5).unwrap();
        let accounts = common::accounts(3);
        let mut h = DifferentialHarness::<u128>::new(accounts.clone());
        for op in common::random_trace(&mut rng, &config, &accounts, 1_000) {
            if let Err(report) = h.step(&op) {
                panic!("{report}");
            }
        }
    }
}

#[test]
fn naive_growth_witness() {
    // distinct-bucket deposits within one TTL window
    let config = ResourceConfig::new(100_000, 10).unwrap();
    let w = config.bucket_width();
    let mut c = RecordBook::<u64>::new(config);
    let mut n = NaiveBucketedBook::<u64>::new(config, PrunePolicy::Never);
    for j in 0..500u64 {
        let now = Timestamp(1 + j * w);
        let e = config.bucketed_expiry(now).unwrap();
        c.insert(1, e, now).unwrap();
        n.insert(1, e, now).unwrap();
        assert_eq!(n.len() as u64, j + 1);
        assert!(c.len() <= 11);
    }
}
