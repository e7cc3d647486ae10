//! Scalar abstraction shared by every numeric kernel in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar the CDF, LP, and metric kernels are written against.
///
/// Implemented for `f32` and `f64`. Everything that crosses a file boundary
/// (CSV, JSON) goes through `f64` and is converted with [`Scalar::of`].
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Machine-precision-aware tolerance used for "sums to one" style checks.
    const NORM_TOL: f64;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count is representable")
    }
}

impl Scalar for f32 {
    const NORM_TOL: f64 = 1e-5;
}

impl Scalar for f64 {
    const NORM_TOL: f64 = 1e-12;
}

/// Sort helper: total order on scalars, NaN sorted last.
#[inline]
pub(crate) fn total_cmp<T: Scalar>(a: &T, b: &T) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or_else(|| a.is_nan().cmp(&b.is_nan()))
}
