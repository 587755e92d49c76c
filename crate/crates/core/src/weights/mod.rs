//! Carleman weights: temporal `h`, spatial `φ`, their sum `ψ = h + δ₂ φ`,
//! and the auxiliary weights used to state the lower bounds.
//!
//! The weights live in Hermite coordinates `(s, y)` with cells
//! `s ∈ [i, i+1]`, `ln(1 + |y|) ∈ [j, j+1]`.

mod aux;
mod h;
mod phi;

pub use aux::{AuxValues, AuxWeights};
pub use h::{audit_h, build_h, build_h_with, dist_to_naturals, HAudit, HConfig, Step, WeightH};
pub use phi::{build_phi, laplacians, radial_from_u, RadialJet, UJet, WeightPhi};

use crate::error::{Error, Result};
use crate::partition::DyadicIndex;
use crate::regularize::EpsilonTable;
use crate::Scalar;

/// `ψ = h + δ₂ φ`.
#[derive(Debug, Clone)]
pub struct Psi<T: Scalar> {
    pub h: WeightH<T>,
    pub phi: WeightPhi<T>,
    pub delta2: T,
}

/// Derivatives of `ψ` at one point of `ℝ × ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiPoint<T> {
    pub value: T,
    pub ds: T,
    pub dss: T,
    /// `∇_y ψ`.
    pub grad: Vec<T>,
    /// `∂_s ∇_y ψ`.
    pub grad_s: Vec<T>,
    /// Row-major `n × n` Hessian in `y`.
    pub hess: Vec<T>,
    /// `Δ_y² ψ`.
    pub bilap: T,
}

/// Couples the weights: `φ` is rebuilt on the row masses `h` actually
/// spends (capped at `τ` and budget-rescaled), so `δ₂ φ` stays small against
/// `h''` whatever the rescale.
pub fn build_psi<T: Scalar>(h: WeightH<T>, phi: WeightPhi<T>, delta2: T) -> Result<Psi<T>> {
    if !(delta2 >= T::zero() && delta2 < T::one()) {
        return Err(Error::Domain(format!("delta2 must lie in [0, 1), got {delta2}")));
    }
    let phi = phi.with_row_scale(h.row_factors())?;
    Ok(Psi { h, phi, delta2 })
}

impl<T: Scalar> Psi<T> {
    pub fn value(&self, s: T, y: &[T]) -> T {
        self.h.value(s) + self.delta2 * self.phi.value(s, y)
    }

    /// `∂_s^l ∂_r^k ψ` for `l ≤ 2`, `k ≤ 4`.
    pub fn radial(&self, s: T, r: T) -> RadialJet<T> {
        let mut jet = self.phi.radial(s, r);
        for row in jet.iter_mut() {
            for v in row.iter_mut() {
                *v *= self.delta2;
            }
        }
        let hv = self.h.eval(s);
        for l in 0..3 {
            jet[l][0] += hv[l];
        }
        jet
    }

    /// Cartesian derivatives at `(s, y)`.
    pub fn point(&self, s: T, y: &[T]) -> PsiPoint<T> {
        let n = y.len();
        let u = y.iter().fold(T::zero(), |a, &v| a + v * v);
        let g = self.phi.u_jet(s, u);
        let d2 = self.delta2;
        let two = T::c(2.0);
        let hv = self.h.eval(s);
        let grad = y.iter().map(|&yk| d2 * two * g[0][1] * yk).collect();
        let grad_s = y.iter().map(|&yk| d2 * two * g[1][1] * yk).collect();
        let mut hess = vec![T::zero(); n * n];
        for a in 0..n {
            for b in 0..n {
                let diag = if a == b { two * g[0][1] } else { T::zero() };
                hess[a * n + b] = d2 * (diag + T::c(4.0) * g[0][2] * y[a] * y[b]);
            }
        }
        let (_, bil) = laplacians(&g[0], u, n);
        PsiPoint {
            value: hv[0] + d2 * g[0][0],
            ds: hv[1] + d2 * g[1][0],
            dss: hv[2] + d2 * g[2][0],
            grad,
            grad_s,
            hess,
            bilap: d2 * bil,
        }
    }

    /// Hessian assembled from the radial split
    /// `ψ_rr ŷ⊗ŷ + (ψ_r / r)(I − ŷ⊗ŷ)`; requires `y ≠ 0`.
    pub fn radial_hessian(&self, s: T, y: &[T]) -> Vec<T> {
        let n = y.len();
        let r = y.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
        let jet = self.radial(s, r);
        let (prr, pr) = (jet[0][2], jet[0][1]);
        let mut out = vec![T::zero(); n * n];
        for a in 0..n {
            for b in 0..n {
                let yy = y[a] * y[b] / (r * r);
                let id = if a == b { T::one() } else { T::zero() };
                out[a * n + b] = prr * yy + pr / r * (id - yy);
            }
        }
        out
    }

    /// Weight in heat coordinates:
    /// `exp(ψ(−ln t / 4, 2x / √t) − |x|² / (8t))`.
    pub fn original_weight(&self, t: T, x: &[T]) -> T {
        let s = -t.ln() / T::c(4.0);
        let scale = T::c(2.0) / t.sqrt();
        let y: Vec<T> = x.iter().map(|&v| v * scale).collect();
        let x2 = x.iter().fold(T::zero(), |a, &v| a + v * v);
        (self.value(s, &y) - x2 / (T::c(8.0) * t)).exp()
    }
}

/// Measured constants of the spatial weight, sampled cell by cell inside
/// the flat region `|y| ≤ 1.5 τ^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiAudit {
    pub min_value: f64,
    /// `max φ / (ε_i τ)`.
    pub value_upper: f64,
    /// `max (|φ_s| + |φ_ss|) / (ε_i τ)`.
    pub time_upper: f64,
    /// `max Σ_{k ≤ 3, l ≤ 2} (1+|y|)^k |∂_r^{1+k} ∂_s^l φ| / (ε_i τ^{1/2})`.
    pub bound_upper: f64,
    /// Range of `∂_r φ / (ε_i τ^{1/2})` over cells with `j ≥ j(i) + 1`.
    pub mono_lower: f64,
    pub mono_upper: f64,
    /// Range of `(1+|y|) ∂_r² φ / (ε_ij τ^{1/2})`.
    pub convex_lower: f64,
    pub convex_upper: f64,
    pub cells: usize,
    pub mono_cells: usize,
}

/// Sample `φ` on a `per_side × per_side` grid in every retained cell.
/// Constants are relative to the (row-scaled) table `φ` is built on.
pub fn audit_phi<T: Scalar>(phi: &WeightPhi<T>, per_side: usize) -> PhiAudit {
    let f = |v: T| v.to_f64_lossy();
    let eps: &EpsilonTable<T> = phi.eps();
    let window = *eps.window();
    let tau = f(phi.tau());
    let flat = f(phi.flat_radius());
    let mut out = PhiAudit {
        min_value: f64::INFINITY,
        value_upper: 0.0,
        time_upper: 0.0,
        bound_upper: 0.0,
        mono_lower: f64::INFINITY,
        mono_upper: 0.0,
        convex_lower: f64::INFINITY,
        convex_upper: 0.0,
        cells: 0,
        mono_cells: 0,
    };
    for i in window.rows() {
        let scale = f(phi.row_scale(i));
        let ei = f(eps.row_sum(i).unwrap()) * scale;
        let ji = eps.threshold(i).unwrap();
        for j in 0..=window.j_cap() {
            let r_lo = (j as f64).exp() - 1.0;
            let r_hi = ((j + 1) as f64).exp() - 1.0;
            if r_lo >= flat {
                continue;
            }
            let r_hi = r_hi.min(flat);
            let eij = f(eps.get(DyadicIndex::new(i, j)).unwrap()) * scale;
            out.cells += 1;
            let mono = j > ji;
            if mono {
                out.mono_cells += 1;
            }
            for a in 0..per_side {
                let s = i as f64 + (a as f64 + 0.5) / per_side as f64;
                let coeffs = phi.coefficients(T::c(s));
                for b in 0..per_side {
                    let r = r_lo + (r_hi - r_lo) * (b as f64 + 0.5) / per_side as f64;
                    let g = phi.u_jet_with(&coeffs, T::c(r * r));
                    let jet = radial_from_u(&g, T::c(r));
                    let d = |l: usize, k: usize| f(jet[l][k]);
                    out.min_value = out.min_value.min(d(0, 0));
                    out.value_upper = out.value_upper.max(d(0, 0) / (ei * tau));
                    out.time_upper = out.time_upper.max((d(1, 0).abs() + d(2, 0).abs()) / (ei * tau));
                    let mut sum = 0.0;
                    for k in 0..=3 {
                        for l in 0..=2 {
                            sum += (1.0 + r).powi(k as i32) * d(l, k + 1).abs();
                        }
                    }
                    out.bound_upper = out.bound_upper.max(sum / (ei * tau.sqrt()));
                    if mono {
                        let m = d(0, 1) / (ei * tau.sqrt());
                        out.mono_lower = out.mono_lower.min(m);
                        out.mono_upper = out.mono_upper.max(m);
                    }
                    let c = (1.0 + r) * d(0, 2) / (eij * tau.sqrt());
                    out.convex_lower = out.convex_lower.min(c);
                    out.convex_upper = out.convex_upper.max(c);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::PartitionWindow;
    use crate::regularize::{finalize, AlphaTable};
    use approx::assert_relative_eq;

    fn psi(delta2: f64) -> Psi<f64> {
        let w = PartitionWindow::new(4.0f64.exp(), 5).unwrap();
        let spike = DyadicIndex::new(3, 1);
        let eps = finalize(&AlphaTable::from_fn(w, |i| if i == spike { 0.2 } else { 0.0 }).unwrap()).unwrap();
        build_psi(build_h(&eps).unwrap(), build_phi(&eps), delta2).unwrap()
    }

    #[test]
    fn zero_delta_is_h() {
        let p = psi(0.0);
        for &s in &[2.2, 3.7, 5.1] {
            assert_eq!(p.value(s, &[1.0, 2.0]), p.h.value(s));
            let pt = p.point(s, &[1.0, 2.0]);
            assert!(pt.grad.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn gradient_is_scaled_phi_gradient() {
        let p = psi(0.01);
        let (s, y) = (3.4, [0.7, -1.3]);
        let pt = p.point(s, &y);
        let h = 1e-5;
        for k in 0..2 {
            let mut yp = y;
            let mut ym = y;
            yp[k] += h;
            ym[k] -= h;
            let num = 0.01 * (p.phi.value(s, &yp) - p.phi.value(s, &ym)) / (2.0 * h);
            assert_relative_eq!(pt.grad[k], num, max_relative = 1e-7);
        }
    }

    #[test]
    fn radial_hessian_split_matches_cartesian() {
        let p = psi(0.05);
        for y in [[0.4, 0.1, -0.3], [3.0, -2.0, 1.0], [5.5, 0.0, 0.2]] {
            let a = p.point(3.1, &y).hess;
            let b = p.radial_hessian(3.1, &y);
            for (u, v) in a.iter().zip(&b) {
                assert_relative_eq!(u, v, max_relative = 1e-10, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn original_weight_uses_parabolic_variable() {
        let p = psi(0.01);
        let (t, x) = ((-4.0f64 * 3.3).exp(), [1e-3]);
        let s = 3.3;
        let y = [2.0 * x[0] / t.sqrt()];
        let expect = (p.value(s, &y) - x[0] * x[0] / (8.0 * t)).exp();
        assert_relative_eq!(p.original_weight(t, &x), expect, max_relative = 1e-12);
    }

    #[test]
    fn floor_table_phi_is_tiny() {
        let w = PartitionWindow::new(4.0f64.exp(), 5).unwrap();
        let eps = finalize(&AlphaTable::zeros(w)).unwrap();
        let phi = build_phi(&eps);
        let a = audit_phi(&phi, 8);
        assert!(a.min_value >= 0.0);
        // φ ≤ C ε_floor τ with C of order the number of levels
        assert!(a.value_upper < 10.0, "{a:?}");
        assert!(a.convex_lower > 0.0);
    }
}
