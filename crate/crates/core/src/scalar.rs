//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt;

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating-point type underlying the complex coefficient field.
///
/// Implemented for `f32` and `f64`. The associated constants carry the
/// precision-dependent thresholds used by pruning, identity checks and the
/// resonance test, so that generic code never hard-codes an `f64` epsilon.
pub trait Scalar:
    RealField
    + Copy
    + FromPrimitive
    + ToPrimitive
    + fmt::Display
    + fmt::LowerExp
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Relative threshold below which polynomial coefficients are dropped.
    const PRUNE_REL: f64;
    /// Relative tolerance for polynomial identity checks.
    const IDENTITY_REL: f64;
    /// Relative singular-value threshold for degree-wise Sylvester operators.
    const RESONANCE_REL: f64;

    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal must convert")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const PRUNE_REL: f64 = 1e-12;
    const IDENTITY_REL: f64 = 1e-9;
    const RESONANCE_REL: f64 = 1e-8;
}

impl Scalar for f32 {
    const PRUNE_REL: f64 = 1e-6;
    const IDENTITY_REL: f64 = 1e-4;
    const RESONANCE_REL: f64 = 1e-4;
}

/// Complex modulus without relying on `num_traits::Float`.
#[inline]
pub fn modulus<T: Scalar>(c: &Complex<T>) -> T {
    c.re.hypot(c.im)
}

#[inline]
pub fn cplx<T: Scalar>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}

#[inline]
pub fn real<T: Scalar>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}
