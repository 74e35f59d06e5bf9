//! Time-bucketed balance records.
//!
//! Fungible tokens with a time-to-live, stored per account as a sorted array
//! of `(amount, expiry)` records. Expiries are rounded up to multiples of the
//! bucket width `w = ceil(T / k)`, so deposits landing in the same bucket
//! coalesce and a book never holds more than `k + 1` records, no matter how
//! many deposits it receives. Tokens never expire before their TTL and live at
//! most `w - 1` seconds past it.
//!
//! Every structure is generic over the unsigned integer used for token units
//! (see [`TokenAmount`]). The aliases below fix it to `u128`, or `u64` for the
//! `*64` variants.

pub mod adversary;
pub mod book;
pub mod bucket;
pub mod cli;
pub mod cost;
pub mod ledger;
pub mod num;
pub mod oracle;
pub mod snapshot;

pub use book::{BalanceRecord, BookError, ConsumedSlice, RecordBook};
pub use bucket::{bucket_width, bucketed_expiry, ConfigError, ResourceConfig, Timestamp};
pub use cost::{CostBound, OpCost, Operation};
pub use ledger::{AccountId, Ledger, LedgerError, LedgerOp, ResourceId};
pub use num::TokenAmount;

/// Default token unit width.
pub type Amount = u128;

pub type RecordBook64 = book::RecordBook<u64>;
pub type Ledger64 = ledger::Ledger<u64>;
pub type NaiveBook = oracle::NaiveBucketedBook<Amount>;
pub type ExactBook = oracle::ExactExpiryBook<Amount>;
