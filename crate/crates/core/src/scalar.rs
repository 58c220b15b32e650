use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the numerical core is written against.
///
/// Implemented for `f32` and `f64`. Everything that touches data, bases,
/// objectives and solvers is generic over it; evaluation metrics and the
/// benchmark harness work in `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + ScalarOperand
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    /// Clamp a requested tolerance so it stays above the type's resolution.
    fn tol_floor(v: f64) -> Self {
        let t = Self::lit(v);
        let floor = Self::epsilon() * Self::lit(64.0);
        if t < floor {
            floor
        } else {
            t
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub(crate) fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

pub(crate) fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tol_floor_respects_precision() {
        assert_eq!(<f64 as Scalar>::tol_floor(1e-8), 1e-8);
        assert!(<f32 as Scalar>::tol_floor(1e-8) > 1e-6);
    }

    #[test]
    fn small_vector_helpers() {
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]), 11.0);
        assert_eq!(sq_dist(&[0.0f32, 0.0], &[3.0, 4.0]), 25.0);
        assert_eq!(norm_sq(&[2.0f64]), 4.0);
    }
}
