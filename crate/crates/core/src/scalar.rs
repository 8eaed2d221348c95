//! Scalar abstraction over `f32` and `f64`.

use std::fmt::{Debug, Display};

/// Floating-point parameter type.
///
/// Arithmetic in this crate widens to `f64` for accumulation and narrows back
/// to `Self` only when values are stored.
pub trait Scalar:
    num_traits::Float + Debug + Display + Default + Send + Sync + 'static
{
    fn widen(self) -> f64;
    fn narrow(v: f64) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn widen(self) -> f64 {
        self as f64
    }
    #[inline]
    fn narrow(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    #[inline]
    fn widen(self) -> f64 {
        self
    }
    #[inline]
    fn narrow(v: f64) -> Self {
        v
    }
}

/// Converts a slice between scalar types via `f64`.
pub fn cast_slice<A: Scalar, B: Scalar>(src: &[A]) -> Vec<B> {
    src.iter().map(|&v| B::narrow(v.widen())).collect()
}
