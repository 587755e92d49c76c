//! Floating point abstraction shared by the generic numerical kernels.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Real scalar usable by the partition, regularization, weight and Hermite kernels.
///
/// Implemented for `f32` and `f64`. Most verification tolerances are only
/// attainable in `f64`; `f32` is supported for cheap sampling and plotting.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn from_i64_lossy(n: i64) -> Self {
        Self::from_i64(n).expect("i64 representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Neumaier-compensated sum; the result does not depend on summation order
/// to within a few ulps, which keeps parallel reductions reproducible.
pub fn compensated_sum<T: Scalar>(items: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut carry = T::zero();
    for x in items {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        let xs = [1.0e16, 1.0, -1.0e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
        assert_eq!(compensated_sum(Vec::<f64>::new()), 0.0);
    }
}
