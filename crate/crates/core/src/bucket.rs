//! Time discretization: bucket width, bucketed expiry, per-resource config.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seconds since epoch 0 on the virtual clock.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub fn secs(self) -> u64 {
        self.0
    }

    pub fn checked_add_secs(self, secs: u64) -> Option<Timestamp> {
        self.0.checked_add(secs).map(Timestamp)
    }

    /// True when this timestamp lies on a boundary of the given width.
    pub fn is_aligned(self, width: u64) -> bool {
        width != 0 && self.0 % width == 0
    }
}

impl From<u64> for Timestamp {
    fn from(secs: u64) -> Self {
        Timestamp(secs)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("invalid config: ttl must be at least 1 second")]
    ZeroTtl,
    #[error("invalid config: bucket count must be at least 1")]
    ZeroBucketCount,
    #[error("arithmetic overflow computing bucketed expiry")]
    Overflow,
}

/// `ceil(ttl / bucket_count)` in integer arithmetic.
pub fn bucket_width(ttl: u64, bucket_count: u64) -> Result<u64, ConfigError> {
    if ttl == 0 {
        return Err(ConfigError::ZeroTtl);
    }
    if bucket_count == 0 {
        return Err(ConfigError::ZeroBucketCount);
    }
    // (ttl + k - 1) / k without the intermediate overflow.
    Ok(ttl / bucket_count + u64::from(ttl % bucket_count != 0))
}

/// Rounds `deposit_time + ttl` up to the next multiple of `width`.
pub fn bucketed_expiry(deposit_time: Timestamp, ttl: u64, width: u64) -> Result<Timestamp, ConfigError> {
    if width == 0 {
        return Err(ConfigError::ZeroBucketCount);
    }
    let exact = deposit_time.0.checked_add(ttl).ok_or(ConfigError::Overflow)?;
    let buckets = exact / width + u64::from(exact % width != 0);
    buckets.checked_mul(width).map(Timestamp).ok_or(ConfigError::Overflow)
}

/// TTL and bucket count for one resource, with the derived bucket width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ResourceConfig {
    ttl: u64,
    bucket_count: u64,
    bucket_width: u64,
}

impl ResourceConfig {
    pub fn new(ttl: u64, bucket_count: u64) -> Result<Self, ConfigError> {
        let bucket_width = bucket_width(ttl, bucket_count)?;
        Ok(Self { ttl, bucket_count, bucket_width })
    }

    pub fn ttl(&self) -> u64 {
        self.ttl
    }

    pub fn bucket_count(&self) -> u64 {
        self.bucket_count
    }

    pub fn bucket_width(&self) -> u64 {
        self.bucket_width
    }

    /// Most records a book under this config can hold: `k + 1`.
    pub fn record_bound(&self) -> usize {
        usize::try_from(self.bucket_count).map_or(usize::MAX, |k| k.saturating_add(1))
    }

    /// Longest a token can outlive its TTL: `w - 1`.
    pub fn max_extra_lifetime(&self) -> u64 {
        self.bucket_width - 1
    }

    pub fn bucketed_expiry(&self, deposit_time: Timestamp) -> Result<Timestamp, ConfigError> {
        bucketed_expiry(deposit_time, self.ttl, self.bucket_width)
    }
}
