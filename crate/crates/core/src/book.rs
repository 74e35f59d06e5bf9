//! Sorted, coalescing record book for one account-resource pair.
//!
//! A book holds at most one record per bucket boundary, ordered by strictly
//! increasing expiry. A record is expired once `now >= expires_at`, so tokens
//! are spendable on the half-open interval `[deposit, expires_at)`.

use thiserror::Error;

use crate::bucket::{ConfigError, ResourceConfig, Timestamp};
use crate::cost::OpCost;
use crate::num::TokenAmount;
use crate::Amount;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BookError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("amount must be greater than zero")]
    ZeroAmount,
    #[error("amount overflow")]
    Overflow,
    #[error("expiry {expiry} is not a multiple of bucket width {width}")]
    MisalignedExpiry { expiry: Timestamp, width: u64 },
    #[error("expiry {expiry} is not after the current time {now}")]
    ExpiryNotInFuture { expiry: Timestamp, now: Timestamp },
    #[error("expiry {expiry} is beyond the latest bucket reachable at time {now} ({horizon})")]
    ExpiryBeyondHorizon { expiry: Timestamp, now: Timestamp, horizon: Timestamp },
    #[error("insufficient balance: requested {requested}, available {available}")]
    InsufficientBalance { requested: u128, available: u128 },
    #[error("books belong to different resource configurations")]
    ConfigMismatch,
    #[error("corrupt book: {0}")]
    Corrupt(String),
}

impl BookError {
    /// Domain statuses as opposed to misuse of the API.
    pub fn is_insufficient_balance(&self) -> bool {
        matches!(self, BookError::InsufficientBalance { .. })
    }
}

/// One `(amount, expiry)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BalanceRecord<A = Amount> {
    pub amount: A,
    pub expires_at: Timestamp,
}

impl<A> BalanceRecord<A> {
    pub fn new(amount: A, expires_at: Timestamp) -> Self {
        Self { amount, expires_at }
    }
}

impl<A: TokenAmount> BalanceRecord<A> {
    pub fn is_live(&self, now: Timestamp) -> bool {
        self.expires_at > now && !self.amount.is_zero()
    }
}

/// Pairs taken by a consume, oldest expiry first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConsumedSlice<A = Amount> {
    parts: Vec<BalanceRecord<A>>,
}

impl<A: TokenAmount> ConsumedSlice<A> {
    pub fn parts(&self) -> &[BalanceRecord<A>] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn total(&self) -> Result<A, BookError> {
        checked_sum(self.parts.iter().map(|p| p.amount))
    }

    pub fn into_parts(self) -> Vec<BalanceRecord<A>> {
        self.parts
    }
}

pub(crate) fn checked_sum<A: TokenAmount>(amounts: impl IntoIterator<Item = A>) -> Result<A, BookError> {
    amounts
        .into_iter()
        .try_fold(A::zero(), |acc, a| acc.checked_add(&a))
        .ok_or(BookError::Overflow)
}

/// Where a new expiry lands relative to existing records.
enum Slot {
    Coalesce(usize),
    InsertAt(usize),
}

/// Deductions computed without touching the book.
struct ConsumePlan<A> {
    parts: Vec<BalanceRecord<A>>,
    /// Index of the first live record (length of the expired prefix).
    first_live: usize,
    cost: OpCost,
}

/// The sorted balance-record array for one account and resource.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordBook<A = Amount> {
    config: ResourceConfig,
    records: Vec<BalanceRecord<A>>,
}

impl<A: TokenAmount> RecordBook<A> {
    pub fn new(config: ResourceConfig) -> Self {
        Self { config, records: Vec::new() }
    }

    /// Rebuilds a book from stored records, rejecting anything that violates
    /// the at-rest invariants.
    pub fn from_records(config: ResourceConfig, records: Vec<BalanceRecord<A>>) -> Result<Self, BookError> {
        let book = Self { config, records };
        book.check_invariants()?;
        Ok(book)
    }

    pub fn config(&self) -> &ResourceConfig {
        &self.config
    }

    pub fn records(&self) -> &[BalanceRecord<A>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Verifies positivity, alignment, strict ordering and the `k + 1` bound.
    pub fn check_invariants(&self) -> Result<(), BookError> {
        let width = self.config.bucket_width();
        if self.records.len() > self.config.record_bound() {
            return Err(BookError::Corrupt(format!(
                "{} records exceed bound {}",
                self.records.len(),
                self.config.record_bound()
            )));
        }
        for r in &self.records {
            if r.amount.is_zero() {
                return Err(BookError::Corrupt(format!("zero amount at expiry {}", r.expires_at)));
            }
            if !r.expires_at.is_aligned(width) {
                return Err(BookError::MisalignedExpiry { expiry: r.expires_at, width });
            }
        }
        if let Some(w) = self.records.windows(2).find(|w| w[0].expires_at >= w[1].expires_at) {
            return Err(BookError::Corrupt(format!(
                "expiries not strictly increasing: {} then {}",
                w[0].expires_at, w[1].expires_at
            )));
        }
        Ok(())
    }

    /// Deposits `amount` expiring at `expiry`, coalescing with an existing
    /// record on the same boundary. Expired records are dropped first.
    pub fn insert(&mut self, amount: A, expiry: Timestamp, now: Timestamp) -> Result<OpCost, BookError> {
        if amount.is_zero() {
            return Err(BookError::ZeroAmount);
        }
        self.check_insertable(expiry, now)?;

        // Expired records form a prefix, and `expiry > now` puts the target
        // slot after all of them, so prune and search share one scan.
        let mut cost = OpCost::default();
        let mut expired = 0;
        let mut slot = Slot::InsertAt(self.records.len());
        for (i, r) in self.records.iter().enumerate() {
            cost.records_visited += 1;
            if !r.is_live(now) {
                expired += 1;
                continue;
            }
            if r.expires_at == expiry {
                slot = Slot::Coalesce(i);
                break;
            }
            if r.expires_at > expiry {
                slot = Slot::InsertAt(i);
                break;
            }
        }

        let merged = match slot {
            Slot::Coalesce(i) => Some(self.records[i].amount.checked_add(&amount).ok_or(BookError::Overflow)?),
            Slot::InsertAt(_) => None,
        };

        cost += self.drop_prefix(expired);
        match (slot, merged) {
            (Slot::Coalesce(i), Some(total)) => {
                self.records[i - expired].amount = total;
                cost.records_written += 1;
            }
            (Slot::InsertAt(i), _) => {
                let at = i - expired;
                cost.records_shifted += (self.records.len() - at) as u64;
                self.records.insert(at, BalanceRecord::new(amount, expiry));
                cost.records_created += 1;
                cost.records_written += 1;
            }
            (Slot::Coalesce(_), None) => unreachable!(),
        }
        Ok(cost)
    }

    /// Deducts `amount` FIFO from live records. On failure the book is
    /// untouched.
    pub fn consume(&mut self, amount: A, now: Timestamp) -> Result<(ConsumedSlice<A>, OpCost), BookError> {
        let plan = self.plan_consume(amount, now)?;
        let (parts, cost) = self.apply_consume(plan);
        Ok((ConsumedSlice { parts }, cost))
    }

    /// Moves `amount` FIFO into `recipient`, keeping each slice's original
    /// expiry. Both books are unchanged on any failure.
    pub fn transfer(&mut self, recipient: &mut Self, amount: A, now: Timestamp) -> Result<OpCost, BookError> {
        if self.config != recipient.config {
            return Err(BookError::ConfigMismatch);
        }
        let plan = self.plan_consume(amount, now)?;
        let mut staged = recipient.clone();
        let mut insert_cost = OpCost::default();
        for part in &plan.parts {
            insert_cost += staged.insert(part.amount, part.expires_at, now)?;
        }
        let (_, mut cost) = self.apply_consume(plan);
        cost += insert_cost;
        *recipient = staged;
        Ok(cost)
    }

    /// Drops every record that is expired or empty.
    pub fn prune(&mut self, now: Timestamp) -> OpCost {
        let mut cost = OpCost::default();
        let mut kept = 0;
        for i in 0..self.records.len() {
            cost.records_visited += 1;
            if self.records[i].is_live(now) {
                if kept != i {
                    self.records[kept] = self.records[i];
                    cost.records_shifted += 1;
                }
                kept += 1;
            } else {
                cost.records_deleted += 1;
            }
        }
        self.records.truncate(kept);
        cost
    }

    pub fn valid_balance(&self, now: Timestamp) -> Result<A, BookError> {
        self.metered_valid_balance(now).map(|(balance, _)| balance)
    }

    pub fn metered_valid_balance(&self, now: Timestamp) -> Result<(A, OpCost), BookError> {
        let cost = OpCost { records_visited: self.records.len() as u64, ..OpCost::default() };
        let balance = checked_sum(self.records.iter().filter(|r| r.expires_at > now).map(|r| r.amount))?;
        Ok((balance, cost))
    }

    fn check_insertable(&self, expiry: Timestamp, now: Timestamp) -> Result<(), BookError> {
        let width = self.config.bucket_width();
        if !expiry.is_aligned(width) {
            return Err(BookError::MisalignedExpiry { expiry, width });
        }
        if expiry <= now {
            return Err(BookError::ExpiryNotInFuture { expiry, now });
        }
        // Expiries past the newest boundary a deposit at `now` could get
        // would break the k + 1 bound.
        let horizon = self.config.bucketed_expiry(now)?;
        if expiry > horizon {
            return Err(BookError::ExpiryBeyondHorizon { expiry, now, horizon });
        }
        Ok(())
    }

    fn plan_consume(&self, amount: A, now: Timestamp) -> Result<ConsumePlan<A>, BookError> {
        if amount.is_zero() {
            return Err(BookError::ZeroAmount);
        }
        let mut cost = OpCost::default();
        let mut remaining = amount;
        let mut parts = Vec::new();
        let mut first_live = 0;
        for r in &self.records {
            cost.records_visited += 1;
            if !r.is_live(now) {
                first_live += 1;
                continue;
            }
            let delta = remaining.min(r.amount);
            parts.push(BalanceRecord::new(delta, r.expires_at));
            remaining = remaining - delta;
            if remaining.is_zero() {
                return Ok(ConsumePlan { parts, first_live, cost });
            }
        }
        Err(BookError::InsufficientBalance { requested: amount.widen(), available: (amount - remaining).widen() })
    }

    fn apply_consume(&mut self, plan: ConsumePlan<A>) -> (Vec<BalanceRecord<A>>, OpCost) {
        let ConsumePlan { parts, first_live, mut cost } = plan;
        // Every touched record but the last is drained; the last may be partial.
        let mut cut = first_live + parts.len();
        if let Some(last) = parts.last() {
            let idx = cut - 1;
            let left = self.records[idx].amount - last.amount;
            if !left.is_zero() {
                self.records[idx].amount = left;
                cost.records_written += 1;
                cut -= 1;
            }
        }
        cost += self.drop_prefix(cut);
        (parts, cost)
    }

    fn drop_prefix(&mut self, n: usize) -> OpCost {
        let mut cost = OpCost::default();
        if n > 0 {
            cost.records_deleted += n as u64;
            cost.records_shifted += (self.records.len() - n) as u64;
            self.records.drain(..n);
        }
        cost
    }
}
