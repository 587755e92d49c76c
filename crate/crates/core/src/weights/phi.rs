//! Radial spatial weight `φ(s, y)`.
//!
//! `φ = τ^{1/2} χ(|y|²/τ) Σ_j a_j(s) sqrt(e^{2j} + |y|²)` where the
//! coefficients `a_j` interpolate `ε_ij` log-linearly through the unit
//! partition in `s`, and `χ` cuts off between `|y| = 1.5 τ^{1/2}` and
//! `|y| = 2 τ^{1/2}`. Everything is a function of `u = |y|²`, so the
//! derivatives are assembled from exact `u`-jets.

use crate::error::{Error, Result};
use crate::regularize::EpsilonTable;
use crate::smooth::{step_poly9, UnitPartition};
use crate::Scalar;

/// `∂_s^l ∂_u^k` of a radial profile, `l ≤ 2`, `k ≤ 4`.
pub type UJet<T> = [[T; 5]; 3];

/// `∂_s^l ∂_r^k`, `l ≤ 2`, `k ≤ 4`.
pub type RadialJet<T> = [[T; 5]; 3];

/// Convert a `u`-jet into radial derivatives at radius `r`.
pub fn radial_from_u<T: Scalar>(g: &UJet<T>, r: T) -> RadialJet<T> {
    let c = T::c;
    let r2 = r * r;
    let mut out = [[T::zero(); 5]; 3];
    for l in 0..3 {
        let [g0, g1, g2, g3, g4] = g[l];
        out[l] = [
            g0,
            c(2.0) * r * g1,
            c(2.0) * g1 + c(4.0) * r2 * g2,
            c(12.0) * r * g2 + c(8.0) * r2 * r * g3,
            c(12.0) * g2 + c(48.0) * r2 * g3 + c(16.0) * r2 * r2 * g4,
        ];
    }
    out
}

/// `Δ` and `Δ²` in `n` dimensions of a profile with `u`-derivatives `g`.
pub fn laplacians<T: Scalar>(g: &[T; 5], u: T, n: usize) -> (T, T) {
    let nn = T::from_usize_lossy(n);
    let two = T::c(2.0);
    let four = T::c(4.0);
    let lap = two * nn * g[1] + four * u * g[2];
    let k1 = (two * nn + four) * g[2] + four * u * g[3];
    let k2 = (two * nn + T::c(8.0)) * g[3] + four * u * g[4];
    (lap, two * nn * k1 + four * u * k2)
}

/// The spatial weight.
#[derive(Debug, Clone)]
pub struct WeightPhi<T: Scalar> {
    eps: EpsilonTable<T>,
    tau: T,
    cap: usize,
    inner: T,
    outer: T,
    row_scale: Vec<T>,
}

/// Build `φ` from a regularized table.
pub fn build_phi<T: Scalar>(eps: &EpsilonTable<T>) -> WeightPhi<T> {
    let tau = eps.tau();
    let rows = eps.window().rows().count();
    WeightPhi {
        eps: eps.clone(),
        tau,
        cap: eps.window().j_cap() as usize,
        inner: T::c(2.25),
        outer: T::c(4.0),
        row_scale: vec![T::one(); rows],
    }
}

impl<T: Scalar> WeightPhi<T> {
    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn eps(&self) -> &EpsilonTable<T> {
        &self.eps
    }

    /// Radius beyond which `φ` vanishes.
    pub fn support_radius(&self) -> T {
        self.tau.sqrt() * self.outer.sqrt()
    }

    /// Radius below which the cutoff is identically one.
    pub fn flat_radius(&self) -> T {
        self.tau.sqrt() * self.inner.sqrt()
    }

    /// Multiply row `i` of the table by `factors[i - i_min]` before blending.
    pub fn with_row_scale(mut self, factors: &[T]) -> Result<Self> {
        if factors.len() != self.row_scale.len() || factors.iter().any(|f| !(*f > T::zero())) {
            return Err(Error::Domain(format!(
                "row scale needs {} positive factors, got {}",
                self.row_scale.len(),
                factors.len()
            )));
        }
        self.row_scale = factors.to_vec();
        Ok(self)
    }

    /// Factor applied to row `i` (clamped to the window).
    pub fn row_scale(&self, i: i64) -> T {
        let w = self.eps.window();
        self.row_scale[(i.clamp(w.i_min, w.i_max) - w.i_min) as usize]
    }

    /// `[a_j, a_j', a_j'']` for `j = 0..=cap`.
    pub fn coefficients(&self, s: T) -> Vec<[T; 3]> {
        (0..=self.cap)
            .map(|j| {
                let [l0, l1, l2] = UnitPartition::blend(s, |i| (self.eps.get_clamped(i, j as i64) * self.row_scale(i)).ln());
                let a = l0.exp();
                [a, l1 * a, (l2 + l1 * l1) * a]
            })
            .collect()
    }

    /// Cutoff `χ(u/τ)` and its first four `u`-derivatives.
    fn cutoff(&self, u: T) -> [T; 5] {
        let width = self.outer - self.inner;
        let scale = T::one() / (width * self.tau);
        let d = step_poly9((u / self.tau - self.inner) / width);
        let mut out = [T::one() - d[0], T::zero(), T::zero(), T::zero(), T::zero()];
        let mut f = T::one();
        for k in 1..5 {
            f *= scale;
            out[k] = -d[k] * f;
        }
        out
    }

    /// `u`-jet of `φ` at time `s` and `u = |y|²`.
    pub fn u_jet(&self, s: T, u: T) -> UJet<T> {
        let coeffs = self.coefficients(s);
        self.u_jet_with(&coeffs, u)
    }

    /// [`u_jet`](Self::u_jet) reusing precomputed coefficients.
    pub fn u_jet_with(&self, coeffs: &[[T; 3]], u: T) -> UJet<T> {
        let mut out = [[T::zero(); 5]; 3];
        if u >= self.outer * self.tau {
            return out;
        }
        let c = [T::one(), T::c(0.5), T::c(-0.25), T::c(0.375), T::c(-0.9375)];
        // S_l^{(k)} = Σ_j a_j^{(l)} F_j^{(k)}
        let mut sums = [[T::zero(); 5]; 3];
        for (j, a) in coeffs.iter().enumerate() {
            let base = (T::c(2.0) * T::from_usize_lossy(j)).exp() + u;
            let root = base.sqrt();
            let inv = base.recip();
            let mut pow = root;
            for k in 0..5 {
                let fk = c[k] * pow;
                for l in 0..3 {
                    sums[l][k] += a[l] * fk;
                }
                pow *= inv;
            }
        }
        let chi = self.cutoff(u);
        let binom = [[1.0, 0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0, 0.0], [
            1.0, 3.0, 3.0, 1.0, 0.0,
        ], [1.0, 4.0, 6.0, 4.0, 1.0]];
        let amp = self.tau.sqrt();
        for l in 0..3 {
            for k in 0..5 {
                let mut acc = T::zero();
                for m in 0..=k {
                    acc += T::c(binom[k][m]) * chi[m] * sums[l][k - m];
                }
                out[l][k] = amp * acc;
            }
        }
        out
    }

    /// `∂_s^l ∂_r^k φ` at radius `r`.
    pub fn radial(&self, s: T, r: T) -> RadialJet<T> {
        radial_from_u(&self.u_jet(s, r * r), r)
    }

    pub fn value(&self, s: T, y: &[T]) -> T {
        let u = y.iter().fold(T::zero(), |a, &v| a + v * v);
        self.u_jet(s, u)[0][0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{DyadicIndex, PartitionWindow};
    use crate::regularize::{finalize, AlphaTable};
    use approx::assert_relative_eq;

    fn spike_phi() -> WeightPhi<f64> {
        let w = PartitionWindow::new(6.0f64.exp(), 5).unwrap();
        let spike = DyadicIndex::new(3, 1);
        let eps = finalize(&AlphaTable::from_fn(w, |i| if i == spike { 0.3 } else { 0.0 }).unwrap()).unwrap();
        build_phi(&eps)
    }

    fn fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn coefficients_collapse_on_plateaus() {
        let phi = spike_phi();
        for i in 2..=5 {
            let c = phi.coefficients(i as f64 + 0.5);
            for (j, a) in c.iter().enumerate() {
                assert_relative_eq!(a[0], phi.eps().get(DyadicIndex::new(i, j as i64)).unwrap(), max_relative = 1e-14);
                assert_eq!(a[1], 0.0);
            }
        }
    }

    #[test]
    fn radial_derivatives_match_finite_differences() {
        let phi = spike_phi();
        let root = phi.tau().sqrt();
        for &s in &[2.1, 3.0, 3.37, 4.9] {
            for &rr in &[0.3, 2.0, 0.9 * root, 1.6 * root, 1.9 * root] {
                let jet = phi.radial(s, rr);
                for k in 0..4 {
                    let num = fd(|x| phi.radial(s, x)[0][k], rr, 1e-3);
                    assert_relative_eq!(jet[0][k + 1], num, max_relative = 1e-6, epsilon = 1e-8);
                }
                for l in 0..2 {
                    let num = fd(|x| phi.radial(x, rr)[l][1], s, 1e-4);
                    assert_relative_eq!(jet[l + 1][1], num, max_relative = 1e-6, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn support_and_sign() {
        let phi = spike_phi();
        let edge = phi.support_radius();
        assert_eq!(phi.radial(3.3, edge * 1.0001)[0][0], 0.0);
        assert_eq!(phi.value(3.3, &[edge, 0.1]), 0.0);
        for k in 0..100 {
            let r = edge * k as f64 / 100.0;
            assert!(phi.radial(3.3, r)[0][0] >= 0.0);
        }
    }

    #[test]
    fn laplacian_of_radial_matches_cartesian_difference() {
        let phi = spike_phi();
        let (s, y) = (3.3, [1.7, -2.2]);
        let u = y[0] * y[0] + y[1] * y[1];
        let jet = phi.u_jet(s, u);
        let (lap, _) = laplacians(&jet[0], u, 2);
        let h = 1e-3;
        let f = |a: f64, b: f64| phi.value(s, &[a, b]);
        let num = (f(y[0] + h, y[1]) + f(y[0] - h, y[1]) + f(y[0], y[1] + h) + f(y[0], y[1] - h) - 4.0 * f(y[0], y[1]))
            / (h * h);
        assert_relative_eq!(lap, num, max_relative = 1e-5);
    }

    #[test]
    fn bilaplacian_of_polynomial_profile() {
        // g(u) = u² in n dims: Δ u² = (8 + 4n) u, Δ² u² = 8n(n + 2)
        for n in 1..=3 {
            let u = 2.5;
            let g = [u * u, 2.0 * u, 2.0, 0.0, 0.0];
            let (lap, bil) = laplacians(&g, u, n);
            let nf = n as f64;
            assert_relative_eq!(lap, (8.0 + 4.0 * nf) * u, max_relative = 1e-14);
            assert_relative_eq!(bil, 8.0 * nf * (nf + 2.0), max_relative = 1e-14);
        }
    }
}
