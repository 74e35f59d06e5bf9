//! Reference models for differential testing.
//!
//! [`NaiveBucketedBook`] keeps one record per deposit slice with the same
//! bucketed expiries; it must agree with [`RecordBook`] on every per-expiry
//! aggregate. [`ExactExpiryBook`] expires deposits at exactly `t + T`; the
//! bucketed structure's valid balance must never fall below it.

use std::collections::BTreeMap;
use std::fmt;

use crate::book::{checked_sum, BalanceRecord, BookError, RecordBook};
use crate::bucket::{ResourceConfig, Timestamp};
use crate::cost::OpCost;
use crate::ledger::{AccountId, Ledger, LedgerError, LedgerOp, ResourceId};
use crate::num::TokenAmount;
use crate::Amount;

/// Sums amounts per expiry, omitting zeros.
pub fn aggregate_by_expiry<'a, A: TokenAmount>(
    records: impl IntoIterator<Item = &'a BalanceRecord<A>>,
) -> Result<BTreeMap<Timestamp, A>, BookError> {
    let mut out = BTreeMap::new();
    for r in records {
        if r.amount.is_zero() {
            continue;
        }
        let slot = out.entry(r.expires_at).or_insert_with(A::zero);
        *slot = slot.checked_add(&r.amount).ok_or(BookError::Overflow)?;
    }
    Ok(out)
}

/// When the naive book drops expired records.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrunePolicy {
    /// Same schedule as the coalesced book: before every insert and after
    /// every successful consume.
    Lazy,
    /// Never; the plain unbounded array.
    Never,
}

/// Unbounded, non-coalescing book sorted by expiry, ties in insertion order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NaiveBucketedBook<A = Amount> {
    config: ResourceConfig,
    records: Vec<BalanceRecord<A>>,
    policy: PrunePolicy,
}

impl<A: TokenAmount> NaiveBucketedBook<A> {
    pub fn new(config: ResourceConfig, policy: PrunePolicy) -> Self {
        Self { config, records: Vec::new(), policy }
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

    /// Test hook for harness self-checks.
    pub fn records_mut(&mut self) -> &mut Vec<BalanceRecord<A>> {
        &mut self.records
    }

    pub fn insert(&mut self, amount: A, expiry: Timestamp, now: Timestamp) -> Result<OpCost, BookError> {
        if amount.is_zero() {
            return Err(BookError::ZeroAmount);
        }
        let width = self.config.bucket_width();
        if !expiry.is_aligned(width) {
            return Err(BookError::MisalignedExpiry { expiry, width });
        }
        if expiry <= now {
            return Err(BookError::ExpiryNotInFuture { expiry, now });
        }
        let mut cost = OpCost::default();
        if self.policy == PrunePolicy::Lazy {
            cost += self.prune(now);
        }
        // Scan from the back: appends are O(1) under a monotone clock.
        let mut at = self.records.len();
        while at > 0 {
            cost.records_visited += 1;
            if self.records[at - 1].expires_at <= expiry {
                break;
            }
            at -= 1;
        }
        cost.records_shifted += (self.records.len() - at) as u64;
        self.records.insert(at, BalanceRecord::new(amount, expiry));
        cost.records_created += 1;
        cost.records_written += 1;
        Ok(cost)
    }

    pub fn consume(&mut self, amount: A, now: Timestamp) -> Result<(Vec<BalanceRecord<A>>, OpCost), BookError> {
        if amount.is_zero() {
            return Err(BookError::ZeroAmount);
        }
        let mut cost = OpCost::default();
        let mut remaining = amount;
        let mut taken = Vec::new();
        for (i, r) in self.records.iter().enumerate() {
            cost.records_visited += 1;
            if !r.is_live(now) {
                continue;
            }
            let delta = remaining.min(r.amount);
            taken.push((i, delta));
            remaining = remaining - delta;
            if remaining.is_zero() {
                break;
            }
        }
        if !remaining.is_zero() {
            return Err(BookError::InsufficientBalance {
                requested: amount.widen(),
                available: (amount - remaining).widen(),
            });
        }
        let parts = taken.iter().map(|&(i, d)| BalanceRecord::new(d, self.records[i].expires_at)).collect();
        for &(i, d) in &taken {
            self.records[i].amount = self.records[i].amount - d;
            cost.records_written += 1;
        }
        match self.policy {
            PrunePolicy::Lazy => cost += self.prune(now),
            PrunePolicy::Never => {
                let before = self.records.len();
                self.records.retain(|r| !r.amount.is_zero());
                cost.records_deleted += (before - self.records.len()) as u64;
            }
        }
        Ok((parts, cost))
    }

    pub fn transfer(&mut self, recipient: &mut Self, amount: A, now: Timestamp) -> Result<OpCost, BookError> {
        if self.config != recipient.config {
            return Err(BookError::ConfigMismatch);
        }
        let mut sender = self.clone();
        let mut staged = recipient.clone();
        let (parts, mut cost) = sender.consume(amount, now)?;
        for p in parts {
            cost += staged.insert(p.amount, p.expires_at, now)?;
        }
        *self = sender;
        *recipient = staged;
        Ok(cost)
    }

    pub fn prune(&mut self, now: Timestamp) -> OpCost {
        let before = self.records.len();
        self.records.retain(|r| r.is_live(now));
        OpCost {
            records_visited: before as u64,
            records_deleted: (before - self.records.len()) as u64,
            ..OpCost::default()
        }
    }

    pub fn valid_balance(&self, now: Timestamp) -> Result<A, BookError> {
        checked_sum(self.records.iter().filter(|r| r.expires_at > now).map(|r| r.amount))
    }
}

/// Unbucketed book: each deposit expires at exactly `t + T`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactExpiryBook<A = Amount> {
    ttl: u64,
    records: Vec<BalanceRecord<A>>,
}

impl<A: TokenAmount> ExactExpiryBook<A> {
    pub fn new(ttl: u64) -> Self {
        Self { ttl, records: Vec::new() }
    }

    pub fn records(&self) -> &[BalanceRecord<A>] {
        &self.records
    }

    pub fn deposit(&mut self, amount: A, deposit_time: Timestamp) -> Result<(), BookError> {
        if amount.is_zero() {
            return Err(BookError::ZeroAmount);
        }
        let expiry = deposit_time.checked_add_secs(self.ttl).ok_or(BookError::Overflow)?;
        self.records.retain(|r| r.is_live(deposit_time));
        let at = self.records.partition_point(|r| r.expires_at <= expiry);
        self.records.insert(at, BalanceRecord::new(amount, expiry));
        Ok(())
    }

    pub fn consume(&mut self, amount: A, now: Timestamp) -> Result<Vec<BalanceRecord<A>>, BookError> {
        if amount.is_zero() {
            return Err(BookError::ZeroAmount);
        }
        let available = self.valid_balance(now)?;
        if available < amount {
            return Err(BookError::InsufficientBalance { requested: amount.widen(), available: available.widen() });
        }
        let mut remaining = amount;
        let mut parts = Vec::new();
        for r in self.records.iter_mut().filter(|r| r.expires_at > now) {
            if remaining.is_zero() {
                break;
            }
            let delta = remaining.min(r.amount);
            r.amount = r.amount - delta;
            remaining = remaining - delta;
            parts.push(BalanceRecord::new(delta, r.expires_at));
        }
        self.prune(now);
        Ok(parts)
    }

    pub fn prune(&mut self, now: Timestamp) {
        self.records.retain(|r| r.is_live(now));
    }

    pub fn valid_balance(&self, now: Timestamp) -> Result<A, BookError> {
        checked_sum(self.records.iter().filter(|r| r.expires_at > now).map(|r| r.amount))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AggregateMismatch<A = Amount> {
    pub coalesced: BTreeMap<Timestamp, A>,
    pub naive: BTreeMap<Timestamp, A>,
}

/// Equal per-expiry aggregates, or the two differing maps.
pub fn check_equivalence<A: TokenAmount>(
    coalesced: &RecordBook<A>,
    naive: &NaiveBucketedBook<A>,
) -> Result<(), AggregateMismatch<A>> {
    let a = aggregate_by_expiry(coalesced.records());
    let b = aggregate_by_expiry(naive.records());
    match (a, b) {
        (Ok(a), Ok(b)) if a == b => Ok(()),
        (a, b) => Err(AggregateMismatch { coalesced: a.unwrap_or_default(), naive: b.unwrap_or_default() }),
    }
}

/// Bucketed valid balance is at least the exact-expiry one at `now`.
pub fn check_dominance<A: TokenAmount>(coalesced: &RecordBook<A>, exact: &ExactExpiryBook<A>, now: Timestamp) -> bool {
    match (coalesced.valid_balance(now), exact.valid_balance(now)) {
        (Ok(a), Ok(b)) => a >= b,
        _ => false,
    }
}

/// Mirror of [`Ledger`] over naive books.
#[derive(Clone, Debug)]
pub struct NaiveLedger<A = Amount> {
    configs: BTreeMap<ResourceId, ResourceConfig>,
    books: BTreeMap<(AccountId, ResourceId), NaiveBucketedBook<A>>,
    clock: Timestamp,
}

impl<A: TokenAmount> Default for NaiveLedger<A> {
    fn default() -> Self {
        Self { configs: BTreeMap::new(), books: BTreeMap::new(), clock: Timestamp::ZERO }
    }
}

impl<A: TokenAmount> NaiveLedger<A> {
    pub fn book(&self, account: &AccountId, resource: &ResourceId) -> Option<&NaiveBucketedBook<A>> {
        self.books.get(&(account.clone(), resource.clone()))
    }

    pub fn book_mut(&mut self, account: &AccountId, resource: &ResourceId) -> Option<&mut NaiveBucketedBook<A>> {
        self.books.get_mut(&(account.clone(), resource.clone()))
    }

    pub fn balance_of(&self, account: &AccountId, resource: &ResourceId) -> Result<A, LedgerError> {
        self.config(resource)?;
        match self.book(account, resource) {
            Some(b) => Ok(b.valid_balance(self.clock)?),
            None => Ok(A::zero()),
        }
    }

    fn config(&self, resource: &ResourceId) -> Result<ResourceConfig, LedgerError> {
        self.configs.get(resource).copied().ok_or_else(|| LedgerError::UnknownResource(resource.clone()))
    }

    pub fn apply(&mut self, op: &LedgerOp<A>) -> Result<(), LedgerError> {
        let now = self.clock;
        match op {
            LedgerOp::DefineResource { resource, ttl, bucket_count } => {
                if self.configs.contains_key(resource) {
                    return Err(LedgerError::DuplicateResource(resource.clone()));
                }
                let c = ResourceConfig::new(*ttl, *bucket_count).map_err(BookError::from)?;
                self.configs.insert(resource.clone(), c);
            }
            LedgerOp::Advance(to) => {
                if *to < self.clock {
                    return Err(LedgerError::TimeRegression { from: self.clock, to: *to });
                }
                self.clock = *to;
            }
            LedgerOp::Mint { account, resource, amount } => {
                let c = self.config(resource)?;
                let expiry = c.bucketed_expiry(now).map_err(BookError::from)?;
                let key = (account.clone(), resource.clone());
                let mut book =
                    self.books.remove(&key).unwrap_or_else(|| NaiveBucketedBook::new(c, PrunePolicy::Lazy));
                let result = book.insert(*amount, expiry, now);
                self.put(key, book);
                result?;
            }
            LedgerOp::Burn { account, resource, amount } => {
                let c = self.config(resource)?;
                let key = (account.clone(), resource.clone());
                let mut book =
                    self.books.remove(&key).unwrap_or_else(|| NaiveBucketedBook::new(c, PrunePolicy::Lazy));
                let result = book.consume(*amount, now);
                self.put(key, book);
                result?;
            }
            LedgerOp::Transfer { from, to, resource, amount } => {
                if from == to {
                    return Err(LedgerError::SelfTransfer);
                }
                let c = self.config(resource)?;
                let fk = (from.clone(), resource.clone());
                let tk = (to.clone(), resource.clone());
                let mut s = self.books.remove(&fk).unwrap_or_else(|| NaiveBucketedBook::new(c, PrunePolicy::Lazy));
                let mut r = self.books.remove(&tk).unwrap_or_else(|| NaiveBucketedBook::new(c, PrunePolicy::Lazy));
                let result = s.transfer(&mut r, *amount, now);
                self.put(fk, s);
                self.put(tk, r);
                result?;
            }
            LedgerOp::Prune { account, resource } => {
                self.config(resource)?;
                let key = (account.clone(), resource.clone());
                if let Some(mut book) = self.books.remove(&key) {
                    book.prune(now);
                    self.put(key, book);
                }
            }
        }
        Ok(())
    }

    fn put(&mut self, key: (AccountId, ResourceId), book: NaiveBucketedBook<A>) {
        if !book.is_empty() {
            self.books.insert(key, book);
        }
    }
}

/// First point where the two models disagreed, with the ops that led there.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DivergenceReport {
    pub trace_prefix: Vec<String>,
    pub detail: String,
    pub coalesced: BTreeMap<Timestamp, u128>,
    pub naive: BTreeMap<Timestamp, u128>,
}

impl fmt::Display for DivergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "divergence after {} ops: {}", self.trace_prefix.len(), self.detail)?;
        for line in &self.trace_prefix {
            writeln!(f, "{line}")?;
        }
        let fmt_map = |m: &BTreeMap<Timestamp, u128>| {
            m.iter().map(|(e, a)| format!("{e}:{a}")).collect::<Vec<_>>().join(" ")
        };
        writeln!(f, "coalesced: {{{}}}", fmt_map(&self.coalesced))?;
        writeln!(f, "naive: {{{}}}", fmt_map(&self.naive))
    }
}

/// Drives a [`Ledger`] and a [`NaiveLedger`] in lockstep and compares
/// statuses, per-expiry aggregates and valid balances after every op.
#[derive(Clone, Debug)]
pub struct DifferentialHarness<A = Amount> {
    coalesced: Ledger<A>,
    naive: NaiveLedger<A>,
    accounts: Vec<AccountId>,
    trace: Vec<String>,
}

impl<A: TokenAmount> DifferentialHarness<A> {
    /// `accounts` lists every account the trace may touch.
    pub fn new(accounts: Vec<AccountId>) -> Self {
        Self { coalesced: Ledger::new(), naive: NaiveLedger::default(), accounts, trace: Vec::new() }
    }

    pub fn coalesced(&self) -> &Ledger<A> {
        &self.coalesced
    }

    pub fn naive_mut(&mut self) -> &mut NaiveLedger<A> {
        &mut self.naive
    }

    pub fn step(&mut self, op: &LedgerOp<A>) -> Result<(), DivergenceReport> {
        self.trace.push(op.to_string());
        let a = op.apply(&mut self.coalesced);
        let b = self.naive.apply(op);
        match (&a, &b) {
            (Ok(_), Ok(())) => {}
            (Err(x), Err(y)) if x == y => {}
            _ => {
                let detail = format!("status mismatch: coalesced {:?}, naive {:?}", a.map(|_| ()), b);
                return Err(self.report(detail, None));
            }
        }
        self.compare()
    }

    /// Compares every tracked account on every defined resource.
    pub fn compare(&self) -> Result<(), DivergenceReport> {
        let resources: Vec<ResourceId> = self.coalesced.resources().map(|(r, _)| r.clone()).collect();
        for resource in &resources {
            for account in &self.accounts {
                let empty: &[BalanceRecord<A>] = &[];
                let c = self.coalesced.book(account, resource).map_or(empty, |b| b.records());
                let n = self.naive.book(account, resource).map_or(empty, |b| b.records());
                let (ca, na) = (aggregate_by_expiry(c), aggregate_by_expiry(n));
                if ca != na {
                    return Err(self.report(format!("aggregates differ for {account}/{resource}"), Some((c, n))));
                }
                let cb = self.coalesced.balance_of(account, resource);
                let nb = self.naive.balance_of(account, resource);
                if cb != nb {
                    return Err(self.report(
                        format!("balance differs for {account}/{resource}: {cb:?} vs {nb:?}"),
                        Some((c, n)),
                    ));
                }
            }
        }
        Ok(())
    }

    fn report(&self, detail: String, books: Option<(&[BalanceRecord<A>], &[BalanceRecord<A>])>) -> DivergenceReport {
        let widen = |recs: &[BalanceRecord<A>]| {
            let mut m = BTreeMap::new();
            for r in recs {
                *m.entry(r.expires_at).or_insert(0u128) += r.amount.widen();
            }
            m.retain(|_, v| *v != 0);
            m
        };
        let (coalesced, naive) = books.map(|(c, n)| (widen(c), widen(n))).unwrap_or_default();
        DivergenceReport { trace_prefix: self.trace.clone(), detail, coalesced, naive }
    }
}
