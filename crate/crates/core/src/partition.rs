//! Double-dyadic space-time cells and the index sets built from them.
//!
//! A cell `(i, j)` collects the points with `e^{-4i-4} ≤ t ≤ e^{-4i}` and
//! `e^j ≤ 1 + 2|x|/√t ≤ e^{j+1}`. The closed inequalities overlap on cell
//! faces, so [`locate`] breaks ties toward the smaller index: cell `(i, j)`
//! owns `−ln t/4 ∈ (i, i+1]` and `ln(1 + 2|x|/√t) ∈ (j, j+1]`, with level
//! zero also owning its lower face.

use std::fmt;

use crate::error::{Error, Result};
use crate::regularize::EpsilonTable;
use crate::Scalar;

/// Address of one dyadic cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DyadicIndex {
    /// Time level: `t ≈ e^{-4i}`.
    pub i: i64,
    /// Spatial level: `1 + 2|x|/√t ≈ e^j`.
    pub j: i64,
}

impl DyadicIndex {
    pub const fn new(i: i64, j: i64) -> Self {
        Self { i, j }
    }

    /// Membership in the cylinder family `j ≤ 2i + 2`.
    pub fn in_cylinder_family(self) -> bool {
        self.j >= 0 && self.j <= 2 * self.i + 2
    }
}

impl fmt::Display for DyadicIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.i, self.j)
    }
}

/// Finite range of time levels retained for a Carleman parameter `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionWindow<T: Scalar> {
    pub tau: T,
    pub i_min: i64,
    pub i_max: i64,
}

impl<T: Scalar> PartitionWindow<T> {
    /// Window starting at the first level with `4i ≥ ln τ + 1`.
    pub fn new(tau: T, i_max: i64) -> Result<Self> {
        if !(tau > T::zero()) || !tau.is_finite() {
            return Err(Error::Domain(format!("tau must be positive and finite, got {tau}")));
        }
        let lower = ((tau.ln() + T::one()) / T::c(4.0)).ceil();
        let i_min = lower.to_i64().unwrap_or(0).max(0);
        Ok(Self { tau, i_min, i_max })
    }

    pub fn is_empty(&self) -> bool {
        self.i_max < self.i_min
    }

    pub fn rows(&self) -> std::ops::RangeInclusive<i64> {
        self.i_min..=self.i_max
    }

    /// Spatial cap `floor(ln τ / 2) + 2`.
    pub fn j_cap(&self) -> i64 {
        j_cap(self.tau)
    }

    /// Largest retained `j` on row `i`.
    pub fn row_j_max(&self, i: i64) -> i64 {
        self.j_cap().min(2 * i + 2)
    }

    pub fn contains(&self, idx: DyadicIndex) -> bool {
        idx.i >= self.i_min && idx.i <= self.i_max && idx.j >= 0 && idx.j <= self.row_j_max(idx.i)
    }

    /// Number of retained cells.
    pub fn len(&self) -> usize {
        self.rows().map(|i| (self.row_j_max(i) + 1).max(0) as usize).sum()
    }
}

/// `floor(ln τ / 2) + 2`, clamped at zero.
pub fn j_cap<T: Scalar>(tau: T) -> i64 {
    let v = (tau.ln() * T::c(0.5)).floor().to_i64().unwrap_or(0) + 2;
    v.max(0)
}

/// Level `k` with `v ∈ (k, k+1]`, zero for `v ≤ 1`; values within rounding of
/// an integer are snapped onto it first.
fn level_of<T: Scalar>(v: T) -> i64 {
    let tol = T::c(1e-12).max(T::epsilon() * T::c(256.0));
    let r = v.round();
    let v = if (v - r).abs() <= tol * T::one().max(v.abs()) { r } else { v };
    (v.ceil().to_i64().unwrap_or(i64::MAX) - 1).max(0)
}

fn norm<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
}

/// Time level coordinate `−ln t / 4`.
pub fn time_level<T: Scalar>(t: T) -> T {
    -t.ln() / T::c(4.0)
}

/// Spatial level coordinate `ln(1 + 2|x|/√t)`.
pub fn space_level<T: Scalar>(t: T, r: T) -> T {
    (T::c(2.0) * r / t.sqrt()).ln_1p()
}

/// The cell owning `(t, x)`.
pub fn locate<T: Scalar>(t: T, x: &[T]) -> Result<DyadicIndex> {
    locate_radius(t, norm(x))
}

/// [`locate`] for a point given by its spatial radius.
pub fn locate_radius<T: Scalar>(t: T, r: T) -> Result<DyadicIndex> {
    if !(t > T::zero()) || !t.is_finite() {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    let one_tol = T::one() + T::c(1e-12).max(T::epsilon() * T::c(4.0));
    if t > one_tol {
        return Err(Error::Domain(format!("time must not exceed 1, got {t}")));
    }
    if !(r >= T::zero()) {
        return Err(Error::Domain(format!("radius must be nonnegative, got {r}")));
    }
    Ok(DyadicIndex::new(level_of(time_level(t)), level_of(space_level(t, r))))
}

/// Indices of the cut-parabola family: `i` in the window, `j ≤ floor(ln τ/2) + 2`,
/// `j ≤ 2i + 2`, in lexicographic order.
pub fn enumerate_a_tau<T: Scalar>(window: &PartitionWindow<T>) -> Vec<DyadicIndex> {
    let mut out = Vec::with_capacity(window.len());
    for i in window.rows() {
        for j in 0..=window.row_j_max(i) {
            out.push(DyadicIndex::new(i, j));
        }
    }
    out
}

/// Family a coarse cylinder cell belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    /// Plain dyadic cell with `j` below the spatial cap.
    Aij,
    /// Whole ball `|x| < e^{-2i}τ^{1/2}` on a late row (`4i > τ^{1/2}`).
    BLogSlab,
    /// Dyadic cell beyond the cap or outside a slab.
    BOuter,
}

impl CellKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::Aij => "A_ij",
            CellKind::BLogSlab => "B_log_slab",
            CellKind::BOuter => "B_outer",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One cell of the coarse cylinder partition.
///
/// `r_lo`/`r_hi` hold the parabolic radius `2|x|/√t` for dyadic cells and the
/// physical radius `|x|` for slabs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell<T: Scalar> {
    pub index: DyadicIndex,
    pub kind: CellKind,
    pub t_lo: T,
    pub t_hi: T,
    pub r_lo: T,
    pub r_hi: T,
    tau: T,
    /// Physical radius carved out of dyadic cells on slab rows.
    hole: T,
}

impl<T: Scalar> Cell<T> {
    /// Whether this cell owns `(t, x)`; cells are disjoint and cover the
    /// cylinder `[0, 1/τ) × B(0, 1)` over the window's rows.
    pub fn contains(&self, t: T, x: &[T]) -> bool {
        self.contains_radius(t, norm(x))
    }

    pub fn contains_radius(&self, t: T, r: T) -> bool {
        if !(t > T::zero()) || t * self.tau >= T::one() || r >= T::one() {
            return false;
        }
        let Ok(idx) = locate_radius(t, r) else {
            return false;
        };
        if idx.i != self.index.i {
            return false;
        }
        match self.kind {
            CellKind::BLogSlab => r < self.hole,
            _ => idx.j == self.index.j && r >= self.hole,
        }
    }
}

/// Coarse cylinder partition for the window's rows.
///
/// Rows with `4i > τ^{1/2}` contribute one slab plus the dyadic cells met by
/// `|x| ≥ e^{-2i}τ^{1/2}`; other rows contribute the dyadic cells with
/// `j ≤ 2i + 2`. Rows start at `floor(ln τ/4)`, the first row clipped to
/// `t < 1/τ`.
pub fn enumerate_b_tau<T: Scalar>(window: &PartitionWindow<T>) -> Vec<Cell<T>> {
    let tau = window.tau;
    let four = T::c(4.0);
    let sqrt_tau = tau.sqrt();
    let cap = window.j_cap();
    let first = (tau.ln() / four).floor().to_i64().unwrap_or(0).max(0);
    let mut out = Vec::new();
    if window.is_empty() {
        return out;
    }
    for i in first.max(0)..=window.i_max {
        let fi = T::from_i64_lossy(i);
        let t_lo = (-four * fi - four).exp();
        let t_hi = (-four * fi).exp().min(T::one() / tau);
        let slab = four * fi > sqrt_tau;
        let (hole, j_start) = if slab {
            let radius = (T::c(-2.0) * fi).exp() * sqrt_tau;
            out.push(Cell {
                index: DyadicIndex::new(i, 0),
                kind: CellKind::BLogSlab,
                t_lo,
                t_hi,
                r_lo: T::zero(),
                r_hi: radius,
                tau,
                hole: radius,
            });
            (radius, level_of((T::c(2.0) * sqrt_tau).ln_1p()))
        } else {
            (T::zero(), 0)
        };
        for j in j_start..=2 * i + 2 {
            let fj = T::from_i64_lossy(j);
            let kind = if !slab && j <= cap { CellKind::Aij } else { CellKind::BOuter };
            out.push(Cell {
                index: DyadicIndex::new(i, j),
                kind,
                t_lo,
                t_hi,
                r_lo: fj.exp() - T::one(),
                r_hi: (fj + T::one()).exp() - T::one(),
                tau,
                hole,
            });
        }
    }
    out
}

/// Which case of the coarse `B_ij` rule applies on a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarseRegime {
    /// `j(i) = 0`: every dyadic cell kept.
    Fine,
    /// `0 < j(i) < cap`: cells below `j(i)` merged.
    Tapered,
    /// `j(i) = cap`: the whole row merged.
    Merged,
}

/// Union of the dyadic cells `(i, j_lo..=j_hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoarseCell {
    pub i: i64,
    pub j_lo: i64,
    pub j_hi: i64,
    pub regime: CoarseRegime,
}

impl CoarseCell {
    pub fn members(&self) -> impl Iterator<Item = DyadicIndex> + '_ {
        (self.j_lo..=self.j_hi).map(move |j| DyadicIndex::new(self.i, j))
    }

    pub fn is_merged(&self) -> bool {
        self.j_hi > self.j_lo
    }
}

/// The coarse cell containing dyadic cell `idx`, following the row threshold
/// `j(i)` of `eps`.
pub fn coarse_b_ij<T: Scalar>(eps: &EpsilonTable<T>, idx: DyadicIndex) -> Result<CoarseCell> {
    let window = eps.window();
    if !window.contains(idx) {
        return Err(Error::OutsideWindow { i: idx.i, j: idx.j });
    }
    let cap = window.j_cap();
    let ji = eps.threshold(idx.i).ok_or(Error::OutsideWindow { i: idx.i, j: idx.j })?;
    let single = |regime| CoarseCell { i: idx.i, j_lo: idx.j, j_hi: idx.j, regime };
    Ok(if ji == 0 {
        single(CoarseRegime::Fine)
    } else if ji >= cap {
        CoarseCell { i: idx.i, j_lo: 0, j_hi: window.row_j_max(idx.i), regime: CoarseRegime::Merged }
    } else if idx.j >= ji {
        single(CoarseRegime::Tapered)
    } else {
        CoarseCell { i: idx.i, j_lo: 0, j_hi: ji - 1, regime: CoarseRegime::Tapered }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(x: f64) -> f64 {
        x.exp()
    }

    #[test]
    fn locate_examples() {
        assert_eq!(locate(e(-6.0), &[0.0]).unwrap(), DyadicIndex::new(1, 0));
        assert_eq!(locate(1.0, &[0.0]).unwrap(), DyadicIndex::new(0, 0));
        let x = 0.5 * e(-3.0) * (e(2.0) - 1.0);
        assert_eq!(locate(e(-6.0), &[x]).unwrap(), DyadicIndex::new(1, 1));
        assert!(locate(0.0, &[0.0]).is_err());
        assert!(locate(-1.0, &[0.0]).is_err());
    }

    #[test]
    fn locate_satisfies_closed_inequalities_by_scan() {
        // independent oracle: scan a window for cells whose closed bounds hold
        let pts = [(e(-6.0), 0.0), (0.3, 0.2), (1e-5, 0.004), (e(-8.0), 0.5 * e(-4.0) * (e(3.0) - 1.0))];
        for (t, x) in pts {
            let got = locate(t, &[x]).unwrap();
            let rho = 1.0 + 2.0 * x / t.sqrt();
            let mut hits = Vec::new();
            for i in 0..12 {
                for j in 0..30 {
                    let tol = 1e-12;
                    let ti = e(-4.0 * i as f64 - 4.0) * (1.0 - tol) <= t && t <= e(-4.0 * i as f64) * (1.0 + tol);
                    let sj = e(j as f64) * (1.0 - tol) <= rho && rho <= e(j as f64 + 1.0) * (1.0 + tol);
                    if ti && sj {
                        hits.push(DyadicIndex::new(i, j));
                    }
                }
            }
            assert!(hits.contains(&got), "{got} not among {hits:?}");
            assert_eq!(got, *hits.iter().min().unwrap());
        }
    }

    #[test]
    fn f32_locate_agrees() {
        assert_eq!(locate(e(-6.0) as f32, &[0.0f32]).unwrap(), DyadicIndex::new(1, 0));
        assert_eq!(locate(1.0f32, &[0.0f32]).unwrap(), DyadicIndex::new(0, 0));
    }

    #[test]
    fn a_tau_examples() {
        let w = PartitionWindow::new(e(8.0), 5).unwrap();
        assert_eq!(w.i_min, 3);
        let cells = enumerate_a_tau(&w);
        assert!(cells.contains(&DyadicIndex::new(3, 0)));
        assert!(!cells.contains(&DyadicIndex::new(2, 0)));
        assert_eq!(w.j_cap(), 6);
        for i in 3..=5 {
            assert_eq!(cells.iter().filter(|c| c.i == i).map(|c| c.j).max(), Some(6));
        }
        let mut sorted = cells.clone();
        sorted.sort();
        assert_eq!(sorted, cells);

        let empty = PartitionWindow { tau: e(8.0), i_min: 3, i_max: 2 };
        assert!(enumerate_a_tau(&empty).is_empty());
        assert!(enumerate_b_tau(&empty).is_empty());
    }

    #[test]
    fn b_tau_slabs_only_on_late_rows() {
        let tau = e(4.0);
        let w = PartitionWindow::new(tau, 4).unwrap();
        let cells = enumerate_b_tau(&w);
        for c in &cells {
            let late = 4.0 * c.index.i as f64 > tau.sqrt();
            if c.kind == CellKind::BLogSlab {
                assert!(late);
                assert!((c.r_hi - (-2.0 * c.index.i as f64).exp() * tau.sqrt()).abs() < 1e-15);
            }
            if !late {
                assert_ne!(c.kind, CellKind::BLogSlab);
            }
        }
        assert_eq!(cells.iter().filter(|c| c.kind == CellKind::BLogSlab).count(), 3);

        let early = PartitionWindow::new(e(8.0), 3).unwrap();
        assert!(enumerate_b_tau(&early).iter().all(|c| c.kind != CellKind::BLogSlab));
    }

    #[test]
    fn coarse_cells_follow_threshold() {
        use crate::regularize::{finalize, AlphaTable};
        let tau = e(8.0);
        let w = PartitionWindow::new(tau, 6).unwrap();
        let eps = finalize(&AlphaTable::zeros(w)).unwrap();
        let cap = w.j_cap();
        for i in w.rows() {
            let ji = eps.threshold(i).unwrap();
            for j in 0..=w.row_j_max(i) {
                let c = coarse_b_ij(&eps, DyadicIndex::new(i, j)).unwrap();
                if ji == 0 {
                    assert!(!c.is_merged());
                } else if ji == cap {
                    assert_eq!((c.j_lo, c.j_hi), (0, cap));
                } else if j < ji {
                    assert_eq!((c.j_lo, c.j_hi), (0, ji - 1));
                }
            }
        }
        assert!(coarse_b_ij(&eps, DyadicIndex::new(9, 0)).is_err());
    }

    proptest! {
        #[test]
        fn scale_consistency(lt in -30.0f64..-1.0, lr in -8.0f64..3.0) {
            let t = lt.exp();
            let x = lr.exp() * t.sqrt();
            let a = locate(t, &[x]).unwrap();
            let sig = time_level(t);
            let rho = space_level(t, x);
            let interior = (sig - sig.round()).abs() > 1e-9 && (rho - rho.round()).abs() > 1e-9;
            prop_assume!(interior);
            let b = locate((-4.0f64).exp() * t, &[(-2.0f64).exp() * x]).unwrap();
            prop_assert_eq!(b, DyadicIndex::new(a.i + 1, a.j));
        }

        #[test]
        fn cut_parabola_cover(u in 0.0f64..1.0, v in 0.0f64..1.0, lt in 4.0f64..9.0) {
            let tau = lt.exp();
            let w = PartitionWindow::new(tau, 8).unwrap();
            let t_hi = (-4.0 * w.i_min as f64).exp();
            let t_lo = (-4.0 * w.i_max as f64 - 4.0).exp();
            let t = (t_lo.ln() + u * (t_hi.ln() - t_lo.ln())).exp() * (1.0 - 1e-9);
            let r = v * (tau * t).sqrt();
            let idx = locate(t, &[r]).unwrap();
            prop_assert!(w.contains(idx), "{} outside for tau {}", idx, tau);
        }

        #[test]
        fn outside_parabola_locates_outside(u in 0.0f64..1.0, lt in 4.0f64..9.0, k in 1.0f64..50.0) {
            let tau = lt.exp();
            let w = PartitionWindow::new(tau, 8).unwrap();
            let t = ((1.0 / tau).ln() * (1.0 - u) * 0.999).exp().min(1.0);
            let r = k * (tau * t).sqrt() + 1e-9;
            let idx = locate(t, &[r]).unwrap();
            prop_assert!(!w.contains(idx));
        }
    }
}
