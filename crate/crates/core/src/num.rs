//! Token amount scalar.
//!
//! Every structure in this crate is generic over the unsigned integer type used
//! for token units. Amount arithmetic is always checked: overflow is an error,
//! never wraparound.

use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::str::FromStr;

use num_traits::{PrimInt, Unsigned};

/// Unsigned integer usable as a token amount (`u8` through `u128`).
pub trait TokenAmount:
    PrimInt + Unsigned + Debug + Display + FromStr + Hash + Default + Send + Sync + 'static
{
    /// Widen to `u128` for reporting. Lossless for every implementor.
    fn widen(self) -> u128 {
        self.to_u128().expect("unsigned primitive fits in u128")
    }

    /// Narrow from `u128`, `None` when the value does not fit.
    fn narrow(value: u128) -> Option<Self> {
        <Self as num_traits::NumCast>::from(value)
    }
}

impl<T> TokenAmount for T where
    T: PrimInt + Unsigned + Debug + Display + FromStr + Hash + Default + Send + Sync + 'static
{
}
