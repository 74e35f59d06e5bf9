//! Multi-account, multi-resource ledger over record books with a monotonic
//! virtual clock.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::book::{BalanceRecord, BookError, RecordBook};
use crate::bucket::{ResourceConfig, Timestamp};
use crate::cost::OpCost;
use crate::num::TokenAmount;
use crate::Amount;

pub const MAX_ID_LEN: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("identifier must not be empty")]
    Empty,
    #[error("identifier exceeds {MAX_ID_LEN} bytes")]
    TooLong,
}

fn validate_id(s: &str) -> Result<(), IdError> {
    if s.is_empty() {
        Err(IdError::Empty)
    } else if s.len() > MAX_ID_LEN {
        Err(IdError::TooLong)
    } else {
        Ok(())
    }
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Result<Self, IdError> {
                let id = id.into();
                validate_id(&id)?;
                Ok(Self(id))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl std::str::FromStr for $name {
            type Err = IdError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::new(s)
            }
        }
    };
}

string_id!(
    /// Opaque account name, 1 to 256 bytes.
    AccountId
);
string_id!(
    /// Opaque resource name, 1 to 256 bytes. Each maps to one config.
    ResourceId
);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error(transparent)]
    Book(#[from] BookError),
    #[error("unknown resource {0}")]
    UnknownResource(ResourceId),
    #[error("resource {0} is already defined")]
    DuplicateResource(ResourceId),
    #[error("clock cannot move backwards from {from} to {to}")]
    TimeRegression { from: Timestamp, to: Timestamp },
    #[error("sender and recipient must differ")]
    SelfTransfer,
}

impl LedgerError {
    pub fn is_insufficient_balance(&self) -> bool {
        matches!(self, LedgerError::Book(e) if e.is_insufficient_balance())
    }
}

type BookKey = (AccountId, ResourceId);

/// Books keyed by (account, resource). Empty books are never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ledger<A = Amount> {
    configs: BTreeMap<ResourceId, ResourceConfig>,
    books: BTreeMap<BookKey, RecordBook<A>>,
    clock: Timestamp,
}

impl<A: TokenAmount> Default for Ledger<A> {
    fn default() -> Self {
        Self::new()
    }
}

impl<A: TokenAmount> Ledger<A> {
    pub fn new() -> Self {
        Self { configs: BTreeMap::new(), books: BTreeMap::new(), clock: Timestamp::ZERO }
    }

    /// Empty ledger whose clock starts at `clock`.
    pub fn starting_at(clock: Timestamp) -> Self {
        Self { clock, ..Self::new() }
    }

    pub fn clock(&self) -> Timestamp {
        self.clock
    }

    pub fn define_resource(&mut self, resource: &ResourceId, ttl: u64, bucket_count: u64) -> Result<(), LedgerError> {
        if self.configs.contains_key(resource) {
            return Err(LedgerError::DuplicateResource(resource.clone()));
        }
        let config = ResourceConfig::new(ttl, bucket_count).map_err(BookError::from)?;
        self.configs.insert(resource.clone(), config);
        Ok(())
    }

    pub fn config(&self, resource: &ResourceId) -> Result<&ResourceConfig, LedgerError> {
        self.configs.get(resource).ok_or_else(|| LedgerError::UnknownResource(resource.clone()))
    }

    pub fn resources(&self) -> impl Iterator<Item = (&ResourceId, &ResourceConfig)> {
        self.configs.iter()
    }

    /// Stored books in (account, resource) order.
    pub fn books(&self) -> impl Iterator<Item = (&AccountId, &ResourceId, &RecordBook<A>)> {
        self.books.iter().map(|((a, r), b)| (a, r, b))
    }

    pub fn book(&self, account: &AccountId, resource: &ResourceId) -> Option<&RecordBook<A>> {
        self.books.get(&(account.clone(), resource.clone()))
    }

    pub fn advance_clock(&mut self, to: Timestamp) -> Result<(), LedgerError> {
        if to < self.clock {
            return Err(LedgerError::TimeRegression { from: self.clock, to });
        }
        self.clock = to;
        Ok(())
    }

    /// Deposits `amount` expiring at the bucketed expiry of the current clock.
    pub fn mint(&mut self, account: &AccountId, resource: &ResourceId, amount: A) -> Result<OpCost, LedgerError> {
        let config = *self.config(resource)?;
        let expiry = config.bucketed_expiry(self.clock).map_err(BookError::from)?;
        let key = (account.clone(), resource.clone());
        let now = self.clock;
        let book = self.books.entry(key.clone()).or_insert_with(|| RecordBook::new(config));
        let result = book.insert(amount, expiry, now);
        self.drop_if_empty(&key);
        Ok(result?)
    }

    pub fn burn(&mut self, account: &AccountId, resource: &ResourceId, amount: A) -> Result<OpCost, LedgerError> {
        let config = *self.config(resource)?;
        let key = (account.clone(), resource.clone());
        let now = self.clock;
        let result = match self.books.get_mut(&key) {
            Some(book) => book.consume(amount, now).map(|(_, cost)| cost),
            None => RecordBook::<A>::new(config).consume(amount, now).map(|(_, cost)| cost),
        };
        self.drop_if_empty(&key);
        Ok(result?)
    }

    pub fn transfer(
        &mut self,
        from: &AccountId,
        to: &AccountId,
        resource: &ResourceId,
        amount: A,
    ) -> Result<OpCost, LedgerError> {
        if from == to {
            return Err(LedgerError::SelfTransfer);
        }
        let config = *self.config(resource)?;
        let now = self.clock;
        let from_key = (from.clone(), resource.clone());
        let to_key = (to.clone(), resource.clone());

        let mut sender = self.books.remove(&from_key).unwrap_or_else(|| RecordBook::new(config));
        let mut recipient = self.books.remove(&to_key).unwrap_or_else(|| RecordBook::new(config));
        let result = sender.transfer(&mut recipient, amount, now);
        for (key, book) in [(from_key, sender), (to_key, recipient)] {
            if !book.is_empty() {
                self.books.insert(key, book);
            }
        }
        Ok(result?)
    }

    /// Valid balance at the current clock; 0 for accounts without a book.
    pub fn balance_of(&self, account: &AccountId, resource: &ResourceId) -> Result<A, LedgerError> {
        self.metered_balance_of(account, resource).map(|(b, _)| b)
    }

    pub fn metered_balance_of(&self, account: &AccountId, resource: &ResourceId) -> Result<(A, OpCost), LedgerError> {
        self.config(resource)?;
        match self.book(account, resource) {
            Some(book) => Ok(book.metered_valid_balance(self.clock)?),
            None => Ok((A::zero(), OpCost::default())),
        }
    }

    pub fn records_of(&self, account: &AccountId, resource: &ResourceId) -> Result<Vec<BalanceRecord<A>>, LedgerError> {
        self.config(resource)?;
        Ok(self.book(account, resource).map(|b| b.records().to_vec()).unwrap_or_default())
    }

    /// Explicit prune at the current clock. Removes the book if it empties.
    pub fn prune(&mut self, account: &AccountId, resource: &ResourceId) -> Result<OpCost, LedgerError> {
        self.config(resource)?;
        let key = (account.clone(), resource.clone());
        let now = self.clock;
        let cost = self.books.get_mut(&key).map(|b| b.prune(now)).unwrap_or_default();
        self.drop_if_empty(&key);
        Ok(cost)
    }

    /// Installs a book read back from storage. The records must satisfy every
    /// book invariant and must not be later than a deposit at the current
    /// clock could produce.
    pub fn restore_book(
        &mut self,
        account: &AccountId,
        resource: &ResourceId,
        records: Vec<BalanceRecord<A>>,
    ) -> Result<(), LedgerError> {
        let config = *self.config(resource)?;
        let book = RecordBook::from_records(config, records)?;
        let horizon = config.bucketed_expiry(self.clock).map_err(BookError::from)?;
        if let Some(last) = book.records().last() {
            if last.expires_at > horizon {
                return Err(BookError::ExpiryBeyondHorizon { expiry: last.expires_at, now: self.clock, horizon }.into());
            }
        } else {
            return Err(BookError::Corrupt(format!("empty book for {account}/{resource}")).into());
        }
        let key = (account.clone(), resource.clone());
        if self.books.contains_key(&key) {
            return Err(BookError::Corrupt(format!("duplicate book for {account}/{resource}")).into());
        }
        self.books.insert(key, book);
        Ok(())
    }

    /// Sum of valid balances over all accounts holding `resource`.
    pub fn total_supply(&self, resource: &ResourceId) -> Result<A, LedgerError> {
        self.config(resource)?;
        let mut total = A::zero();
        for (_, r, book) in self.books() {
            if r == resource {
                total = total.checked_add(&book.valid_balance(self.clock)?).ok_or(BookError::Overflow)?;
            }
        }
        Ok(total)
    }

    fn drop_if_empty(&mut self, key: &BookKey) {
        if self.books.get(key).is_some_and(RecordBook::is_empty) {
            self.books.remove(key);
        }
    }
}

/// One ledger mutation, replayable against any ledger.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LedgerOp<A = Amount> {
    DefineResource { resource: ResourceId, ttl: u64, bucket_count: u64 },
    Advance(Timestamp),
    Mint { account: AccountId, resource: ResourceId, amount: A },
    Burn { account: AccountId, resource: ResourceId, amount: A },
    Transfer { from: AccountId, to: AccountId, resource: ResourceId, amount: A },
    Prune { account: AccountId, resource: ResourceId },
}

impl<A: TokenAmount> LedgerOp<A> {
    pub fn apply(&self, ledger: &mut Ledger<A>) -> Result<OpCost, LedgerError> {
        match self {
            LedgerOp::DefineResource { resource, ttl, bucket_count } => {
                ledger.define_resource(resource, *ttl, *bucket_count).map(|_| OpCost::default())
            }
            LedgerOp::Advance(to) => ledger.advance_clock(*to).map(|_| OpCost::default()),
            LedgerOp::Mint { account, resource, amount } => ledger.mint(account, resource, *amount),
            LedgerOp::Burn { account, resource, amount } => ledger.burn(account, resource, *amount),
            LedgerOp::Transfer { from, to, resource, amount } => ledger.transfer(from, to, resource, *amount),
            LedgerOp::Prune { account, resource } => ledger.prune(account, resource),
        }
    }
}

/// Same words as the command-line grammar.
impl<A: TokenAmount> fmt::Display for LedgerOp<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LedgerOp::DefineResource { resource, ttl, bucket_count } => {
                write!(f, "define-resource {resource} --ttl {ttl} --k {bucket_count}")
            }
            LedgerOp::Advance(to) => write!(f, "advance {to}"),
            LedgerOp::Mint { account, resource, amount } => write!(f, "mint {account} {resource} {amount}"),
            LedgerOp::Burn { account, resource, amount } => write!(f, "burn {account} {resource} {amount}"),
            LedgerOp::Transfer { from, to, resource, amount } => write!(f, "transfer {from} {to} {resource} {amount}"),
            LedgerOp::Prune { account, resource } => write!(f, "prune {account} {resource}"),
        }
    }
}
