//! Smooth steps, cutoffs and partitions of unity.
//!
//! Every function here returns its value together with the derivatives the
//! weight constructions need, so callers never differentiate numerically.

use crate::Scalar;

/// C^∞ step rising from 0 at `u <= 0` to 1 at `u >= 1`, with two derivatives.
///
/// Written as a logistic of `1/(1-u) - 1/u`, which equals
/// `e^{-1/u} / (e^{-1/u} + e^{-1/(1-u)})`.
pub fn step_inf<T: Scalar>(u: T) -> [T; 3] {
    let (zero, one) = (T::zero(), T::one());
    if u <= zero {
        return [zero, zero, zero];
    }
    if u >= one {
        return [one, zero, zero];
    }
    let v = one - u;
    let z = one / v - one / u;
    // logistic, evaluated on the stable side
    let sig = if z >= zero {
        one / (one + (-z).exp())
    } else {
        let e = z.exp();
        e / (one + e)
    };
    let ds = sig * (one - sig);
    let two = T::c(2.0);
    let dz = one / (v * v) + one / (u * u);
    let d2z = two / (v * v * v) - two / (u * u * u);
    let d2s = ds * (one - two * sig);
    [sig, ds * dz, d2s * dz * dz + ds * d2z]
}

/// Degree-9 polynomial smoothstep (C⁴), value and four derivatives.
pub fn step_poly9<T: Scalar>(u: T) -> [T; 5] {
    let (zero, one) = (T::zero(), T::one());
    if u <= zero {
        return [zero; 5];
    }
    if u >= one {
        return [one, zero, zero, zero, zero];
    }
    let x = u;
    let w = one - x;
    let x2 = x * x;
    let value = x2
        * x2
        * x
        * (T::c(126.0) + x * (T::c(-420.0) + x * (T::c(540.0) + x * (T::c(-315.0) + x * T::c(70.0)))));
    let d1 = T::c(630.0) * x2 * x2 * w * w * w * w;
    let d2 = T::c(2520.0) * x2 * x * w * w * w * (one - T::c(2.0) * x);
    let p = x2 * w * w;
    let q = T::c(3.0) - T::c(14.0) * x + T::c(14.0) * x2;
    let dp = T::c(2.0) * x * w * (one - T::c(2.0) * x);
    let dq = T::c(-14.0) + T::c(28.0) * x;
    let d3 = T::c(2520.0) * p * q;
    let d4 = T::c(2520.0) * (dp * q + p * dq);
    [value, d1, d2, d3, d4]
}

/// Compactly supported C^∞ bump `exp(-1/(1-u²))` on `(lo, hi)`, with two
/// derivatives in the original variable.
pub fn bump_inf<T: Scalar>(s: T, lo: T, hi: T) -> [T; 3] {
    let zero = T::zero();
    if s <= lo || s >= hi {
        return [zero; 3];
    }
    let one = T::one();
    let two = T::c(2.0);
    let du = two / (hi - lo);
    let u = (s - lo) * du - one;
    let q = one - u * u;
    let v = (-one / q).exp();
    let g1 = -two * u / (q * q);
    let g2 = -two / (q * q) - T::c(8.0) * u * u / (q * q * q);
    [v, v * g1 * du, v * (g1 * g1 + g2) * du * du]
}

/// Partition of unity `Σ_i η(x - i) = 1` on the integer lattice.
///
/// `η` is supported in `[-δ, 1+δ]` with δ = [`Self::OVERLAP`] = ½, so
/// neighbours overlap everywhere and `η` reaches 1 only at the midpoint.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitPartition;

impl UnitPartition {
    pub const OVERLAP: f64 = 0.5;

    fn rise<T: Scalar>(x: T) -> [T; 3] {
        let d = T::c(Self::OVERLAP);
        let scale = T::one() / (T::c(2.0) * d);
        let [v, d1, d2] = step_inf((x + d) * scale);
        [v, d1 * scale, d2 * scale * scale]
    }

    /// `η(x)` and its first two derivatives.
    pub fn bump<T: Scalar>(x: T) -> [T; 3] {
        let a = Self::rise(x);
        let b = Self::rise(x - T::one());
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    /// Nonzero terms `(i, [η, η', η''](x - i))` at `x`.
    pub fn terms<T: Scalar>(x: T) -> impl Iterator<Item = (i64, [T; 3])> {
        let base = x.floor().to_i64().unwrap_or(0);
        (base - 1..=base + 1).filter_map(move |i| {
            let w = Self::bump(x - T::from_i64_lossy(i));
            if w[0] == T::zero() && w[1] == T::zero() && w[2] == T::zero() {
                None
            } else {
                Some((i, w))
            }
        })
    }

    /// Blend `Σ_i η(x-i) f(i)` with derivatives.
    pub fn blend<T: Scalar>(x: T, mut f: impl FnMut(i64) -> T) -> [T; 3] {
        let mut out = [T::zero(); 3];
        for (i, w) in Self::terms(x) {
            let v = f(i);
            for k in 0..3 {
                out[k] += w[k] * v;
            }
        }
        out
    }
}

/// Partition of unity subordinate to a sorted list of centers, with
/// `η_k ≡ 1` on a neighbourhood of `centers[k]`.
///
/// The transition between neighbouring centers occupies the middle half of
/// the gap; below the first and above the last center the end functions are 1.
#[derive(Debug, Clone)]
pub struct CenteredPartition<T: Scalar> {
    centers: Vec<T>,
}

impl<T: Scalar> CenteredPartition<T> {
    pub fn new(centers: Vec<T>) -> Self {
        assert!(!centers.is_empty(), "partition needs at least one center");
        assert!(
            centers.windows(2).all(|w| w[0] < w[1]),
            "centers must be strictly increasing"
        );
        Self { centers }
    }

    pub fn centers(&self) -> &[T] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Rise `T_k` (k ≥ 1) between centers k-1 and k, with two derivatives.
    fn rise(&self, k: usize, x: T) -> [T; 3] {
        if k == 0 {
            return [T::one(), T::zero(), T::zero()];
        }
        if k >= self.centers.len() {
            return [T::zero(); 3];
        }
        let lo = self.centers[k - 1];
        let gap = self.centers[k] - lo;
        let start = lo + gap * T::c(0.25);
        let scale = T::c(2.0) / gap;
        let [v, d1, d2] = step_inf((x - start) * scale);
        [v, d1 * scale, d2 * scale * scale]
    }

    /// `η_k(x)` with two derivatives.
    pub fn bump(&self, k: usize, x: T) -> [T; 3] {
        let a = self.rise(k, x);
        let b = self.rise(k + 1, x);
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    /// Indices whose bump can be nonzero at `x`.
    pub fn active(&self, x: T) -> std::ops::RangeInclusive<usize> {
        let n = self.centers.len();
        let pos = self.centers.partition_point(|&c| c <= x);
        let lo = pos.saturating_sub(1);
        let hi = pos.min(n - 1);
        lo..=hi
    }
}
