//! Abstract operation costs standing in for gas.
//!
//! Every record comparison, move, creation, write or deletion inside a book
//! operation bumps exactly one counter. All counters weigh 1 in [`OpCost::total`].

use std::fmt;
use std::ops::{Add, AddAssign};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bucket::{ResourceConfig, Timestamp};
use crate::ledger::{AccountId, Ledger, LedgerError, LedgerOp, ResourceId};
use crate::num::TokenAmount;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct OpCost {
    pub records_visited: u64,
    pub records_shifted: u64,
    pub records_created: u64,
    pub records_written: u64,
    pub records_deleted: u64,
}

impl OpCost {
    pub fn total(&self) -> u64 {
        self.records_visited + self.records_shifted + self.records_created + self.records_written + self.records_deleted
    }

    /// Total under an alternative weighting, e.g. storage writes far more
    /// expensive than reads. Reported only.
    pub fn weighted(&self, w: &CostWeights) -> u64 {
        self.records_visited * w.visit
            + self.records_shifted * w.shift
            + self.records_created * w.create
            + self.records_written * w.write
            + self.records_deleted * w.delete
    }
}

impl AddAssign for OpCost {
    fn add_assign(&mut self, rhs: Self) {
        self.records_visited += rhs.records_visited;
        self.records_shifted += rhs.records_shifted;
        self.records_created += rhs.records_created;
        self.records_written += rhs.records_written;
        self.records_deleted += rhs.records_deleted;
    }
}

impl Add for OpCost {
    type Output = OpCost;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CostWeights {
    pub visit: u64,
    pub shift: u64,
    pub create: u64,
    pub write: u64,
    pub delete: u64,
}

impl CostWeights {
    pub const UNIT: CostWeights = CostWeights { visit: 1, shift: 1, create: 1, write: 1, delete: 1 };

    /// Rough storage-heavy profile: a fresh slot is 20,000, an update 5,000,
    /// a read 2,100.
    pub const STORAGE_HEAVY: CostWeights =
        CostWeights { visit: 2_100, shift: 5_000, create: 20_000, write: 5_000, delete: 5_000 };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operation {
    Insert,
    Consume,
    Transfer,
    Prune,
    Balance,
}

impl Operation {
    pub const ALL: [Operation; 5] =
        [Operation::Insert, Operation::Consume, Operation::Transfer, Operation::Prune, Operation::Balance];

    pub fn as_str(&self) -> &'static str {
        match self {
            Operation::Insert => "insert",
            Operation::Consume => "consume",
            Operation::Transfer => "transfer",
            Operation::Prune => "prune",
            Operation::Balance => "balance",
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `quadratic * (k+1)^2 + linear * (k+1) + constant`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CostBound {
    pub operation: Operation,
    pub quadratic: u64,
    pub linear: u64,
    pub constant: u64,
}

// Per-op worst cases with n <= k + 1 records:
//   insert  visited n, deleted+shifted(prefix) n, shifted(insert) n, created 1, written 1
//   consume visited n, deleted+shifted n, written 1
//   prune   visited n, deleted+shifted n
//   balance visited n
// Transfer is one consume plus at most k + 1 inserts, and 4(k+1) <= 2(k+1)^2.
const LINEAR_PER_RECORD: u64 = 3;
const LINEAR_CONSTANT: u64 = 2;
const TRANSFER_QUADRATIC: u64 = 5;
const TRANSFER_CONSTANT: u64 = 1;

impl CostBound {
    pub fn for_operation(operation: Operation) -> Self {
        match operation {
            Operation::Transfer => {
                CostBound { operation, quadratic: TRANSFER_QUADRATIC, linear: 0, constant: TRANSFER_CONSTANT }
            }
            _ => CostBound { operation, quadratic: 0, linear: LINEAR_PER_RECORD, constant: LINEAR_CONSTANT },
        }
    }

    pub fn evaluate(&self, k: u64) -> u64 {
        let n = k.saturating_add(1);
        self.quadratic
            .saturating_mul(n.saturating_mul(n))
            .saturating_add(self.linear.saturating_mul(n))
            .saturating_add(self.constant)
    }

    /// True when `cost` fits under this bound for bucket count `k`.
    pub fn admits(&self, cost: &OpCost, k: u64) -> bool {
        cost.total() <= self.evaluate(k)
    }
}

pub fn assert_bound(cost: &OpCost, k: u64, bound: &CostBound) -> bool {
    bound.admits(cost, k)
}

/// One line of a cost report.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostRow {
    pub operation: Operation,
    pub k: u64,
    pub cost: OpCost,
}

impl CostRow {
    pub const CSV_HEADER: &'static str =
        "operation,k,recordsVisited,recordsShifted,recordsCreated,recordsWritten,recordsDeleted,total";

    pub fn to_csv(&self) -> String {
        let c = &self.cost;
        format!(
            "{},{},{},{},{},{},{},{}",
            self.operation,
            self.k,
            c.records_visited,
            c.records_shifted,
            c.records_created,
            c.records_written,
            c.records_deleted,
            c.total()
        )
    }
}

/// Least-squares slope of `ln(total)` against `ln(k)`.
pub fn log_log_slope(points: &[(u64, u64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|&(k, _)| (k as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, c)| (c.max(1) as f64).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WorstCaseKind {
    BurnAll,
    TransferAll,
}

pub const VICTIM: &str = "victim";
pub const SINK: &str = "sink";
pub const RESOURCE: &str = "res";

/// Deposit schedule that fills the victim's book with one record per bucket,
/// followed by a full-balance burn or transfer.
///
/// Mints land one bucket width apart. Starting one second past a boundary
/// makes the `k + 1` live boundaries reachable whenever `w > 1`.
pub fn worst_case_scenario<A: TokenAmount>(
    config: &ResourceConfig,
    kind: WorstCaseKind,
    amounts: &mut dyn FnMut() -> A,
) -> Vec<LedgerOp<A>> {
    let victim = AccountId::new(VICTIM).expect("valid id");
    let sink = AccountId::new(SINK).expect("valid id");
    let resource = ResourceId::new(RESOURCE).expect("valid id");
    let w = config.bucket_width();
    let start = u64::from(w > 1);

    let mut ops = vec![LedgerOp::DefineResource {
        resource: resource.clone(),
        ttl: config.ttl(),
        bucket_count: config.bucket_count(),
    }];
    let end = Timestamp(start + config.bucket_count() * w);
    let mut total = A::zero();
    for j in 0..=config.bucket_count() {
        let at = Timestamp(start + j * w);
        let amount = amounts();
        if config.bucketed_expiry(at).expect("scenario times fit") > end {
            total = total.checked_add(&amount).expect("scenario amounts fit");
        }
        ops.push(LedgerOp::Advance(at));
        ops.push(LedgerOp::Mint { account: victim.clone(), resource: resource.clone(), amount });
    }
    ops.push(match kind {
        WorstCaseKind::BurnAll => LedgerOp::Burn { account: victim, resource, amount: total },
        WorstCaseKind::TransferAll => LedgerOp::Transfer { from: victim, to: sink, resource, amount: total },
    });
    ops
}

/// Replays ops and returns the cost of each.
pub fn replay<A: TokenAmount>(ledger: &mut Ledger<A>, ops: &[LedgerOp<A>]) -> Result<Vec<OpCost>, LedgerError> {
    ops.iter().map(|op| op.apply(ledger)).collect()
}

/// Worst-case cost of every operation at each `k`, with `T = 1000 k` so the
/// bucket width is 1000 s. The seed only varies deposit amounts.
pub fn bench_costs(k_values: &[u64], seed: u64) -> Result<Vec<CostRow>, LedgerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for &k in k_values {
        let config = ResourceConfig::new(1000 * k, k).map_err(crate::book::BookError::from)?;
        let mut amounts = || rng.gen_range(1u128..=1_000);
        let burn = worst_case_scenario(&config, WorstCaseKind::BurnAll, &mut amounts);
        let transfer = worst_case_scenario(&config, WorstCaseKind::TransferAll, &mut amounts);

        let mut ledger: Ledger = Ledger::new();
        let burn_costs = replay(&mut ledger, &burn)?;
        // Last mint lands after every existing record.
        let insert_cost = burn_costs[burn_costs.len() - 2];

        let mut ledger: Ledger = Ledger::new();
        let (saturated, tail) = transfer.split_at(transfer.len() - 1);
        replay(&mut ledger, saturated)?;
        let victim = AccountId::new(VICTIM).expect("valid id");
        let resource = ResourceId::new(RESOURCE).expect("valid id");
        let (_, balance_cost) = ledger.metered_balance_of(&victim, &resource)?;

        let mut expired = ledger.clone();
        expired.advance_clock(Timestamp(u64::MAX / 2))?;
        let prune_cost = expired.prune(&victim, &resource)?;

        let transfer_cost = tail[0].apply(&mut ledger)?;

        for (operation, cost) in [
            (Operation::Insert, insert_cost),
            (Operation::Consume, burn_costs[burn_costs.len() - 1]),
            (Operation::Transfer, transfer_cost),
            (Operation::Prune, prune_cost),
            (Operation::Balance, balance_cost),
        ] {
            rows.push(CostRow { operation, k, cost });
        }
    }
    Ok(rows)
}
