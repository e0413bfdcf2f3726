//! Scalar abstraction for the numeric core.

use nalgebra::RealField;
use num_traits::NumCast;

/// Real scalar usable throughout the crate: `f32` or `f64`.
///
/// `RealField` supplies the linear-algebra and transcendental operations,
/// `NumCast` the conversions from literal constants, and the marker bounds
/// allow profiles and rasters to be computed on parallel workers.
pub trait Scalar:
    RealField + NumCast + Copy + Send + Sync + std::fmt::Display + std::fmt::Debug
{
}

impl<T> Scalar for T where
    T: RealField + NumCast + Copy + Send + Sync + std::fmt::Display + std::fmt::Debug
{
}

/// Converts an `f64` constant into the working scalar type.
///
/// Panics only if the target type cannot represent ordinary finite values,
/// which cannot happen for the floating-point types this crate supports.
#[inline]
pub fn cvt<T: Scalar>(x: f64) -> T {
    <T as NumCast>::from(x).expect("finite constant must convert")
}
