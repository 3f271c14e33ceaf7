//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};

use ndarray::LinalgScalar;
use num_traits::{Float, FromPrimitive, NumAssignOps};

/// Floating-point type the cells, head, optimizer and metrics are generic over.
///
/// Implemented for `f32`, `f64` and the double-double [`crate::dd::Dd`], which
/// only serves as a high-precision reference for finite differences.
/// Bit-exact serialization guarantees assume `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssignOps
    + LinalgScalar
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
impl Scalar for crate::dd::Dd {}

/// Sequential left-to-right sum.
#[inline]
pub fn sum<T: Scalar, I: IntoIterator<Item = T>>(items: I) -> T {
    items.into_iter().fold(T::zero(), |a, b| a + b)
}

/// Logistic sigmoid `1 / (1 + e^{-z})`.
#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Derivative of the logistic sigmoid expressed through its value.
#[inline]
pub fn sigmoid_grad_from_value<T: Scalar>(s: T) -> T {
    s * (T::one() - s)
}

pub(crate) fn all_finite<T: Scalar>(xs: &[T]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_symmetric_and_stable() {
        for &z in &[-800.0, -30.0, -1.5, 0.0, 0.25, 30.0, 800.0] {
            let s: f64 = sigmoid(z);
            assert!(s.is_finite());
            assert!((s + sigmoid(-z) - 1.0).abs() < 1e-15);
        }
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert_eq!(sigmoid(0.0f32), 0.5);
    }
}
