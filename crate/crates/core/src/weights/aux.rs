//! Auxiliary weights `a`, `a_int`, `a_⊥`, `b`, `b_⊥` and the profile `r(s)`.
//!
//! Each weight is defined cell by cell through its fourth power, then glued
//! with the unit partition in `s` and in `ρ = ln(1 + |y|)`. Positive weights
//! are glued geometrically, the perpendicular ones (which vanish on whole
//! cells) linearly. All implicit constants are one.

use crate::partition::{DyadicIndex, PartitionWindow};
use crate::regularize::EpsilonTable;
use crate::smooth::UnitPartition;
use crate::Scalar;

/// Weights at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxValues<T> {
    pub a: T,
    pub a_int: T,
    pub a_perp: T,
    pub b: T,
    pub b_perp: T,
}

/// Auxiliary weights over a regularized table.
#[derive(Debug, Clone)]
pub struct AuxWeights<T: Scalar> {
    eps: EpsilonTable<T>,
    tau: T,
    perp_top: i64,
}

impl<T: Scalar> AuxWeights<T> {
    pub fn new(eps: &EpsilonTable<T>) -> Self {
        let tau = eps.tau();
        let perp_top = (tau.ln() * T::c(0.5)).floor().to_i64().unwrap_or(0) - 1;
        Self { eps: eps.clone(), tau, perp_top }
    }

    pub fn window(&self) -> &PartitionWindow<T> {
        self.eps.window()
    }

    /// Smooth saturation `|y|(1 + |y|⁴/τ²)^{-1/4}`, `≈ min(|y|, τ^{1/2})`.
    fn saturated(&self, r: T) -> T {
        let r2 = r * r;
        r * (T::one() + r2 * r2 / (self.tau * self.tau)).powf(T::c(-0.25))
    }

    fn interior4(&self, i: i64, j: i64, r: T) -> T {
        self.eps.get_clamped(i, j) * self.tau.powf(T::c(1.5)) / (T::one() + self.saturated(r))
    }

    /// Lowest spatial level where `a_⊥` is switched on in row `i`.
    fn perp_floor(&self, i: i64) -> i64 {
        (i - 1..=i + 1).map(|k| self.eps.threshold_clamped(k)).max().unwrap()
    }

    fn perp4(&self, i: i64, j: i64, r: T) -> T {
        if j < self.perp_floor(i) || j > self.perp_top {
            return T::zero();
        }
        self.eps.row_sum_clamped(i) * self.tau.powf(T::c(1.5)) / (T::one() + self.saturated(r))
    }

    fn b4(&self, i: i64, j: i64, r: T) -> T {
        let cap = self.window().j_cap();
        let ji = self.eps.threshold_clamped(i);
        if ji == 0 || (ji < cap && j >= ji) {
            T::one() + self.interior4(i, j, r)
        } else if ji >= cap {
            T::one()
        } else {
            let frozen = (T::from_i64_lossy(ji) + T::c(0.5)).exp() - T::one();
            T::one() + self.interior4(i, ji, frozen)
        }
    }

    fn glue(&self, s: T, r: T, geometric: bool, cell: impl Fn(i64, i64) -> T) -> T {
        let rho = r.ln_1p();
        let mut acc = T::zero();
        for (i, wi) in UnitPartition::terms(s) {
            for (j, wj) in UnitPartition::terms(rho) {
                let v = cell(i, j.max(0));
                acc += wi[0] * wj[0] * if geometric { v.ln() } else { v };
            }
        }
        if geometric {
            acc.exp()
        } else {
            acc
        }
    }

    /// All five weights at time `s` and radius `r = |y|`.
    pub fn eval(&self, s: T, r: T) -> AuxValues<T> {
        let q = T::c(0.25);
        let a_int4 = self.glue(s, r, true, |i, j| self.interior4(i, j, r));
        let a4 = self.glue(s, r, true, |i, j| T::one() + self.interior4(i, j, r));
        let perp4 = self.glue(s, r, false, |i, j| self.perp4(i, j, r)).max(T::zero());
        let b4 = self.glue(s, r, true, |i, j| self.b4(i, j, r));
        AuxValues { a: a4.powf(q), a_int: a_int4.powf(q), a_perp: perp4.powf(q), b: b4.powf(q), b_perp: perp4.powf(q) }
    }

    /// Taper radius `r(s)`, `≈ e^{j(i)}` on row `i`, within `[1, τ^{1/2}]`.
    pub fn r_of_s(&self, s: T) -> T {
        let top = self.tau.ln() * T::c(0.5);
        UnitPartition::blend(s, |i| T::from_i64_lossy(self.eps.threshold_clamped(i)).min(top))[0].exp()
    }

    /// Blended row mass `ε(s)`.
    pub fn eps_of_s(&self, s: T) -> T {
        UnitPartition::blend(s, |i| self.eps.row_sum_clamped(i).ln())[0].exp()
    }

    /// `M = max(1, ε(s) τ^{1/2})`.
    pub fn big_m(&self, s: T) -> T {
        T::one().max(self.eps_of_s(s) * self.tau.sqrt())
    }

    /// Whether `(s, r)` lies in a cell where `b_⊥` may be nonzero:
    /// `j(i) - 1 ≤ j ≤ floor(ln τ / 2)` for the cell `(floor s, j)`.
    pub fn perp_cell_allowed(&self, s: T, r: T) -> bool {
        let i = s.floor().to_i64().unwrap_or(0);
        let rho = r.ln_1p();
        let j = (rho.ceil().to_i64().unwrap_or(0) - 1).max(0);
        let top = (self.tau.ln() * T::c(0.5)).floor().to_i64().unwrap_or(0);
        j >= self.eps.threshold_clamped(i) - 1 && j <= top
    }

    pub fn index_at(&self, s: T, r: T) -> DyadicIndex {
        let i = s.floor().to_i64().unwrap_or(0);
        let j = (r.ln_1p().ceil().to_i64().unwrap_or(0) - 1).max(0);
        DyadicIndex::new(i, j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularize::{finalize, AlphaTable};
    use approx::assert_relative_eq;

    fn table(lt: f64, spike: Option<(i64, i64, f64)>) -> EpsilonTable<f64> {
        let w = PartitionWindow::new(lt.exp(), 7).unwrap();
        let alpha = AlphaTable::from_fn(w, |idx| match spike {
            Some((i, j, v)) if idx.i == i && idx.j == j => v,
            _ => 0.0,
        })
        .unwrap();
        finalize(&alpha).unwrap()
    }

    #[test]
    fn fine_rows_have_b_equal_a() {
        let eps = table(6.0, Some((4, 0, 0.9)));
        let aux = AuxWeights::new(&eps);
        let fine: Vec<i64> = eps.window().rows().filter(|&i| eps.threshold(i) == Some(0)).collect();
        assert!(!fine.is_empty());
        for &i in &fine {
            // rows whose neighbours are fine too, sampled on the s-plateau
            if [i - 1, i + 1].iter().all(|k| eps.threshold_clamped(*k) == 0) {
                for &r in &[0.0, 1.0, 5.0, 15.0] {
                    let v = aux.eval(i as f64 + 0.5, r);
                    assert_relative_eq!(v.b, v.a, max_relative = 1e-12);
                    assert_eq!(v.b_perp, v.a_perp);
                }
            }
        }
    }

    #[test]
    fn merged_rows_have_unit_b() {
        let eps = table(8.0, None);
        let aux = AuxWeights::new(&eps);
        for i in eps.window().rows() {
            assert_eq!(eps.threshold(i), Some(eps.window().j_cap()));
            let v = aux.eval(i as f64 + 0.5, 3.0);
            assert_relative_eq!(v.b, 1.0, epsilon = 1e-14);
            assert_eq!(v.b_perp, 0.0);
        }
    }

    #[test]
    fn interior_weights_match_across_the_seam() {
        let eps = table(8.0, Some((5, 4, 0.5)));
        let aux = AuxWeights::new(&eps);
        let root = eps.tau().sqrt();
        let below = aux.eval(5.5, root * 0.999);
        let above = aux.eval(5.5, root * 1.001);
        assert_relative_eq!(below.a, above.a, max_relative = 1e-2);
    }

    #[test]
    fn perpendicular_support() {
        let eps = table(8.0, Some((5, 2, 0.02)));
        let aux = AuxWeights::new(&eps);
        for k in 0..400 {
            let s = 3.0 + 5.0 * k as f64 / 400.0;
            for m in 0..60 {
                let r = (m as f64 * 0.12).exp() - 1.0;
                if !aux.perp_cell_allowed(s, r) {
                    assert_eq!(aux.eval(s, r).b_perp, 0.0, "s {s} r {r}");
                }
            }
        }
    }

    #[test]
    fn taper_radius_is_bounded() {
        let eps = table(6.0, Some((3, 1, 0.01)));
        let aux = AuxWeights::new(&eps);
        for k in 0..100 {
            let r = aux.r_of_s(2.0 + 6.0 * k as f64 / 100.0);
            assert!(r >= 1.0 - 1e-12 && r <= eps.tau().sqrt() * (1.0 + 1e-12));
        }
    }
}
