//! Floating-point abstraction shared by the numerical core.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type the estimation code is generic over.
///
/// Implemented for `f32` and `f64`. Configuration values (levels, tolerances,
/// bounds) stay `f64` and are converted with [`Scalar::lit`].
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    /// Converts a count into `Self`.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lossy conversion to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Arithmetic mean of a slice; zero for an empty slice.
pub(crate) fn mean<T: Scalar>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    xs.iter().copied().sum::<T>() / T::count(xs.len())
}
