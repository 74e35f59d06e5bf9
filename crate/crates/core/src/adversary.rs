//! Adversarial deposit workloads against a victim account.
//!
//! The attacker controls deposit count, size and timing. Each run replays the
//! schedule on a fresh ledger, then measures what a full-balance burn and a
//! full-balance transfer cost the victim afterwards.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bucket::{ResourceConfig, Timestamp};
use crate::cost::OpCost;
use crate::ledger::{AccountId, Ledger, LedgerError, ResourceId};
use crate::num::TokenAmount;
use crate::oracle::{NaiveBucketedBook, PrunePolicy};
use crate::Amount;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TimingStrategy {
    /// Every deposit rounds to the same bucket boundary.
    SameBucket,
    /// One bucket width between consecutive deposits.
    SpreadAcrossBuckets,
    /// Uniform gaps in `[0, 2w]`.
    RandomTimes,
}

impl TimingStrategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            TimingStrategy::SameBucket => "sameBucket",
            TimingStrategy::SpreadAcrossBuckets => "spreadAcrossBuckets",
            TimingStrategy::RandomTimes => "randomTimes",
        }
    }
}

impl fmt::Display for TimingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TimingStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sameBucket" => Ok(TimingStrategy::SameBucket),
            "spreadAcrossBuckets" => Ok(TimingStrategy::SpreadAcrossBuckets),
            "randomTimes" => Ok(TimingStrategy::RandomTimes),
            other => Err(format!("unknown strategy {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackPlan<A = Amount> {
    pub deposit_count: u64,
    pub amount_per_deposit: A,
    pub timing: TimingStrategy,
    pub target: AccountId,
    /// Minted to the victim at time 0 before the attack; zero for none.
    pub victim_funding: A,
}

impl<A: TokenAmount> AttackPlan<A> {
    pub fn new(deposit_count: u64, amount_per_deposit: A, timing: TimingStrategy) -> Self {
        Self {
            deposit_count,
            amount_per_deposit,
            timing,
            target: AccountId::new("victim").expect("valid id"),
            victim_funding: A::zero(),
        }
    }

    pub fn with_funding(mut self, funding: A) -> Self {
        self.victim_funding = funding;
        self
    }

    /// Deposit times, non-decreasing. Deterministic per seed.
    pub fn schedule(&self, config: &ResourceConfig, seed: u64) -> Vec<Timestamp> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = config.bucket_width();
        let n = self.deposit_count;
        let mut times: Vec<u64> = match self.timing {
            TimingStrategy::SameBucket => {
                let start = rng.gen_range(0..w);
                // Latest t with the same rounded expiry as `start`.
                let expiry = config.bucketed_expiry(Timestamp(start)).expect("schedule fits").0;
                let last = expiry - config.ttl();
                (0..n).map(|_| rng.gen_range(start..=last)).collect()
            }
            TimingStrategy::SpreadAcrossBuckets => {
                let start = u64::from(w > 1);
                (0..n).map(|j| start + j * w).collect()
            }
            TimingStrategy::RandomTimes => {
                let mut t = 0u64;
                (0..n)
                    .map(|_| {
                        t += rng.gen_range(0..=2 * w);
                        t
                    })
                    .collect()
            }
        };
        times.sort_unstable();
        times.into_iter().map(Timestamp).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackReport<A = Amount> {
    pub attack_deposits: u64,
    pub record_count_before: usize,
    pub record_count_after: usize,
    /// `k + 1`.
    pub bound: usize,
    pub victim_balance: A,
    pub victim_burn_cost: OpCost,
    pub victim_transfer_cost: OpCost,
    pub final_clock: Timestamp,
}

/// Same attack replayed on the unbounded per-deposit array.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaselineReport {
    pub record_count_after: usize,
    pub victim_burn_cost: OpCost,
    pub victim_transfer_cost: OpCost,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnboundedComparison<A = Amount> {
    pub bucketed: AttackReport<A>,
    pub naive: BaselineReport,
}

const RESOURCE: &str = "attacked";
const SINK: &str = "sink";

pub fn run_attack<A: TokenAmount>(
    plan: &AttackPlan<A>,
    config: &ResourceConfig,
    seed: u64,
) -> Result<AttackReport<A>, LedgerError> {
    let resource = ResourceId::new(RESOURCE).expect("valid id");
    let victim = &plan.target;
    let mut ledger = Ledger::<A>::new();
    ledger.define_resource(&resource, config.ttl(), config.bucket_count())?;
    if !plan.victim_funding.is_zero() {
        ledger.mint(victim, &resource, plan.victim_funding)?;
    }
    let record_count_before = ledger.book(victim, &resource).map_or(0, |b| b.len());

    for at in plan.schedule(config, seed) {
        // Never let a deposit move the clock backwards.
        let at = at.max(ledger.clock());
        ledger.advance_clock(at)?;
        ledger.mint(victim, &resource, plan.amount_per_deposit)?;
    }

    let record_count_after = ledger.book(victim, &resource).map_or(0, |b| b.len());
    let victim_balance = ledger.balance_of(victim, &resource)?;
    let (victim_burn_cost, victim_transfer_cost) = if victim_balance.is_zero() {
        (OpCost::default(), OpCost::default())
    } else {
        let burn = ledger.clone().burn(victim, &resource, victim_balance)?;
        let sink = if victim.as_str() == SINK { "sink-2" } else { SINK };
        let sink = AccountId::new(sink).expect("valid id");
        let transfer = ledger.clone().transfer(victim, &sink, &resource, victim_balance)?;
        (burn, transfer)
    };

    Ok(AttackReport {
        attack_deposits: plan.deposit_count,
        record_count_before,
        record_count_after,
        bound: config.record_bound(),
        victim_balance,
        victim_burn_cost,
        victim_transfer_cost,
        final_clock: ledger.clock(),
    })
}

pub fn compare_with_unbounded<A: TokenAmount>(
    plan: &AttackPlan<A>,
    config: &ResourceConfig,
    seed: u64,
) -> Result<UnboundedComparison<A>, LedgerError> {
    let bucketed = run_attack(plan, config, seed)?;

    let mut book = NaiveBucketedBook::<A>::new(*config, PrunePolicy::Never);
    let mut clock = Timestamp::ZERO;
    let deposit = |book: &mut NaiveBucketedBook<A>, t: Timestamp, amount: A| -> Result<(), LedgerError> {
        let expiry = config.bucketed_expiry(t).map_err(crate::book::BookError::from)?;
        book.insert(amount, expiry, t)?;
        Ok(())
    };
    if !plan.victim_funding.is_zero() {
        deposit(&mut book, clock, plan.victim_funding)?;
    }
    for at in plan.schedule(config, seed) {
        clock = at.max(clock);
        deposit(&mut book, clock, plan.amount_per_deposit)?;
    }
    let balance = book.valid_balance(clock)?;
    let (victim_burn_cost, victim_transfer_cost) = if balance.is_zero() {
        (OpCost::default(), OpCost::default())
    } else {
        let (_, burn) = book.clone().consume(balance, clock)?;
        let mut sink = NaiveBucketedBook::new(*config, PrunePolicy::Never);
        let transfer = book.clone().transfer(&mut sink, balance, clock)?;
        (burn, transfer)
    };

    Ok(UnboundedComparison {
        bucketed,
        naive: BaselineReport { record_count_after: book.len(), victim_burn_cost, victim_transfer_cost },
    })
}

impl<A: TokenAmount> UnboundedComparison<A> {
    pub const CSV_HEADER: &'static str = "model,strategy,deposits,k,ttl,bucketWidth,seed,recordCount,bound,\
burnVisited,burnTotal,transferVisited,transferTotal";

    /// Two CSV rows, bucketed then naive.
    pub fn csv_rows(&self, plan: &AttackPlan<A>, config: &ResourceConfig, seed: u64) -> [String; 2] {
        let prefix = |model: &str| {
            format!(
                "{model},{},{},{},{},{},{seed}",
                plan.timing,
                plan.deposit_count,
                config.bucket_count(),
                config.ttl(),
                config.bucket_width()
            )
        };
        let b = &self.bucketed;
        let n = &self.naive;
        [
            format!(
                "{},{},{},{},{},{},{}",
                prefix("bucketed"),
                b.record_count_after,
                b.bound,
                b.victim_burn_cost.records_visited,
                b.victim_burn_cost.total(),
                b.victim_transfer_cost.records_visited,
                b.victim_transfer_cost.total()
            ),
            format!(
                "{},{},{},{},{},{},{}",
                prefix("naive"),
                n.record_count_after,
                b.bound,
                n.victim_burn_cost.records_visited,
                n.victim_burn_cost.total(),
                n.victim_transfer_cost.records_visited,
                n.victim_transfer_cost.total()
            ),
        ]
    }

    /// Short prose summary for humans.
    pub fn summary(&self) -> String {
        let b = &self.bucketed;
        let n = &self.naive;
        format!(
            "{} deposits: bucketed book holds {} records (bound {}), naive holds {}; \
burn-all visits {} vs {}; transfer-all visits {} vs {}",
            b.attack_deposits,
            b.record_count_after,
            b.bound,
            n.record_count_after,
            b.victim_burn_cost.records_visited,
            n.victim_burn_cost.records_visited,
            b.victim_transfer_cost.records_visited,
            n.victim_transfer_cost.records_visited
        )
    }
}
