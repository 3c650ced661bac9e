//! Scalar abstraction for the continuous (Gaussian, transport, ODE) side.
//!
//! The Boolean side is exact and uses [`Rational`]; everything that lives on
//! `R^n` is generic over [`Real`], implemented for `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Exact rational with 128-bit numerator and denominator.
///
/// Boolean quantities have power-of-two denominators bounded by `4^n`, so
/// every product that appears in the pair bounds fits comfortably.
pub type Rational = Ratio<i128>;

/// Floating point scalar usable by the Gaussian-side modules.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Never fails for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an exact rational to the nearest representable float.
pub fn rational_to_real<T: Real>(r: &Rational) -> T {
    T::lit(rational_to_f64(r))
}

/// `numer / denom` computed in `f64`; exact whenever both fit in 53 bits.
pub fn rational_to_f64(r: &Rational) -> f64 {
    (*r.numer() as f64) / (*r.denom() as f64)
}
