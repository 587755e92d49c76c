//! Slowly varying majorants of coefficient-size tables.
//!
//! Raw per-cell sizes `α_ij` are spread by an exponential cone, boosted
//! toward the spatial cap and around a guessed threshold, floored, and closed
//! under the ½-log-Lipschitz envelope. The result dominates `α`, is summable,
//! varies slowly in both indices and carries a unique threshold `j(i)` per row.

use rand::Rng;

use crate::error::{Error, Result};
use crate::partition::{DyadicIndex, PartitionWindow};
use crate::Scalar;

/// Row-major storage over a window; every row holds `j = 0..=cap`.
#[derive(Debug, Clone, PartialEq)]
struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    fn filled(rows: usize, cols: usize, v: T) -> Self {
        Self { rows, cols, data: vec![v; rows * cols] }
    }

    fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

fn check_window<T: Scalar>(window: &PartitionWindow<T>) -> Result<()> {
    if !(window.tau > T::one()) {
        return Err(Error::Domain(format!("tau must exceed 1, got {}", window.tau)));
    }
    if window.is_empty() {
        return Err(Error::Domain(format!(
            "empty window: i_max {} below i_min {}",
            window.i_max, window.i_min
        )));
    }
    Ok(())
}

fn shape<T: Scalar>(window: &PartitionWindow<T>) -> (usize, usize) {
    ((window.i_max - window.i_min + 1) as usize, (window.j_cap() + 1) as usize)
}

/// Nonnegative per-cell coefficient sizes over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaTable<T: Scalar> {
    window: PartitionWindow<T>,
    values: Grid<T>,
    /// Scale divided out by [`AlphaTable::normalize`].
    pub delta1: T,
}

impl<T: Scalar> AlphaTable<T> {
    /// All-zero table. Panics on an empty window or `τ ≤ 1`.
    pub fn zeros(window: PartitionWindow<T>) -> Self {
        Self::try_zeros(window).expect("valid window")
    }

    pub fn try_zeros(window: PartitionWindow<T>) -> Result<Self> {
        check_window(&window)?;
        let (r, c) = shape(&window);
        Ok(Self { window, values: Grid::filled(r, c, T::zero()), delta1: T::one() })
    }

    pub fn from_fn(window: PartitionWindow<T>, mut f: impl FnMut(DyadicIndex) -> T) -> Result<Self> {
        let mut out = Self::try_zeros(window)?;
        for idx in out.indices().collect::<Vec<_>>() {
            out.set(idx, f(idx))?;
        }
        Ok(out)
    }

    /// Sparse table of 1 to 3 spikes with log-uniform heights in `[τ^{-3/2}, 1]`,
    /// normalized to unit ℓ¹ mass when heavier.
    pub fn random_spikes<R: Rng + ?Sized>(window: PartitionWindow<T>, rng: &mut R) -> Self {
        let mut out = Self::zeros(window);
        let (rows, cols) = shape(&window);
        let count = rng.gen_range(1..=3);
        let lo = -1.5 * window.tau.to_f64_lossy().ln();
        for _ in 0..count {
            let r = rng.gen_range(0..rows);
            let c = rng.gen_range(0..cols);
            let h = T::c(rng.gen_range(lo..=0.0).exp());
            let v = out.values.at(r, c).max(h);
            out.values.set(r, c, v);
        }
        out.normalize();
        out
    }

    pub fn window(&self) -> &PartitionWindow<T> {
        &self.window
    }

    pub fn indices(&self) -> impl Iterator<Item = DyadicIndex> + '_ {
        let cap = self.window.j_cap();
        self.window.rows().flat_map(move |i| (0..=cap).map(move |j| DyadicIndex::new(i, j)))
    }

    fn slot(&self, idx: DyadicIndex) -> Result<(usize, usize)> {
        if !self.window.contains(idx) {
            return Err(Error::OutsideWindow { i: idx.i, j: idx.j });
        }
        Ok(((idx.i - self.window.i_min) as usize, idx.j as usize))
    }

    pub fn get(&self, idx: DyadicIndex) -> Result<T> {
        let (r, c) = self.slot(idx)?;
        Ok(self.values.at(r, c))
    }

    pub fn set(&mut self, idx: DyadicIndex, v: T) -> Result<()> {
        if !(v >= T::zero()) || !v.is_finite() {
            return Err(Error::Domain(format!("alpha at {idx} must be finite and nonnegative, got {v}")));
        }
        let (r, c) = self.slot(idx)?;
        self.values.set(r, c, v);
        Ok(())
    }

    pub fn l1(&self) -> T {
        self.values.data.iter().fold(T::zero(), |a, &b| a + b)
    }

    pub fn max(&self) -> T {
        self.values.data.iter().fold(T::zero(), |a, &b| a.max(b))
    }

    /// Divide by `max(1, ℓ¹, sup)` so both norms are at most 1; the factor is
    /// accumulated into `delta1`.
    pub fn normalize(&mut self) -> T {
        let scale = T::one().max(self.l1()).max(self.max());
        if scale > T::one() {
            for v in &mut self.values.data {
                *v /= scale;
            }
            self.delta1 *= scale;
        }
        scale
    }

    pub fn is_normalized(&self) -> bool {
        let slack = T::one() + T::c(1e-12);
        self.l1() <= slack && self.max() <= slack
    }
}

/// Cone-spread and cap-augmented table before the threshold boost.
#[derive(Debug, Clone, PartialEq)]
pub struct Mollified<T: Scalar> {
    window: PartitionWindow<T>,
    cone: Grid<T>,
    values: Grid<T>,
    row_sums: Vec<T>,
}

impl<T: Scalar> Mollified<T> {
    /// Cone maximum `max_kl α_kl e^{-½(|i-k|+|j-l|)}` before augmentation.
    pub fn cone(&self, idx: DyadicIndex) -> T {
        self.cone.at((idx.i - self.window.i_min) as usize, idx.j as usize)
    }

    /// Augmented value.
    pub fn get(&self, idx: DyadicIndex) -> T {
        self.values.at((idx.i - self.window.i_min) as usize, idx.j as usize)
    }

    /// Row sum of augmented values.
    pub fn row_sum(&self, i: i64) -> T {
        self.row_sums[(i - self.window.i_min) as usize]
    }
}

/// Spread `α` by the exponential cone, then add `e^{-½|j-cap|}` times the
/// pre-augmentation row sum to each entry.
pub fn mollify<T: Scalar>(alpha: &AlphaTable<T>) -> Mollified<T> {
    let (rows, cols) = (alpha.values.rows, alpha.values.cols);
    let half = T::c(0.5);
    let mut cone = Grid::filled(rows, cols, T::zero());
    let spikes: Vec<(usize, usize, T)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .filter_map(|(r, c)| {
            let a = alpha.values.at(r, c);
            (a > T::zero()).then_some((r, c, a))
        })
        .collect();
    for r in 0..rows {
        for c in 0..cols {
            let mut best = T::zero();
            for &(k, l, a) in &spikes {
                let d = T::from_usize_lossy(r.abs_diff(k) + c.abs_diff(l));
                best = best.max(a * (-half * d).exp());
            }
            cone.set(r, c, best);
        }
    }
    let cap = cols - 1;
    let mut values = cone.clone();
    for r in 0..rows {
        let sum = cone.row(r).iter().fold(T::zero(), |a, &b| a + b);
        for c in 0..cols {
            let w = (-half * T::from_usize_lossy(c.abs_diff(cap))).exp();
            values.set(r, c, cone.at(r, c) + w * sum);
        }
    }
    let row_sums = (0..rows).map(|r| values.row(r).iter().fold(T::zero(), |a, &b| a + b)).collect();
    Mollified { window: alpha.window, cone, values, row_sums }
}

/// Preliminary real-valued threshold for a row with sum `row_sum`.
pub fn threshold_guess<T: Scalar>(row_sum: T, tau: T) -> T {
    let inv_sqrt = T::one() / tau.sqrt();
    if row_sum < T::one() / tau {
        tau.ln() * T::c(0.5)
    } else if row_sum < inv_sqrt {
        -(row_sum * tau.sqrt()).ln()
    } else {
        T::zero()
    }
}

/// Lower floor applied to every entry: `τ^{-2}`.
pub fn epsilon_floor<T: Scalar>(tau: T) -> T {
    (tau * tau).recip()
}

/// Regularized table with row sums and thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonTable<T: Scalar> {
    window: PartitionWindow<T>,
    values: Grid<T>,
    row_sums: Vec<T>,
    thresholds: Vec<i64>,
    guesses: Vec<T>,
    floor: T,
}

impl<T: Scalar> EpsilonTable<T> {
    /// Wrap externally supplied positive values; row sums and thresholds are
    /// derived, guesses are taken from the row sums.
    pub fn from_fn(window: PartitionWindow<T>, mut f: impl FnMut(DyadicIndex) -> T) -> Result<Self> {
        check_window(&window)?;
        let (rows, cols) = shape(&window);
        let mut values = Grid::filled(rows, cols, T::zero());
        for r in 0..rows {
            for c in 0..cols {
                let idx = DyadicIndex::new(window.i_min + r as i64, c as i64);
                let v = f(idx);
                if !(v > T::zero()) || !v.is_finite() {
                    return Err(Error::Domain(format!("epsilon at {idx} must be positive, got {v}")));
                }
                values.set(r, c, v);
            }
        }
        let floor = values.data.iter().fold(T::infinity(), |a, &b| a.min(b));
        Self::assemble(window, values, None, floor)
    }

    fn assemble(window: PartitionWindow<T>, values: Grid<T>, guesses: Option<Vec<T>>, floor: T) -> Result<Self> {
        let rows = values.rows;
        let row_sums: Vec<T> =
            (0..rows).map(|r| values.row(r).iter().fold(T::zero(), |a, &b| a + b)).collect();
        let guesses =
            guesses.unwrap_or_else(|| row_sums.iter().map(|&s| threshold_guess(s, window.tau)).collect());
        let mut thresholds = Vec::with_capacity(rows);
        for r in 0..rows {
            thresholds.push(crossing(values.row(r), window.tau, window.i_min + r as i64)?);
        }
        Ok(Self { window, values, row_sums, thresholds, guesses, floor })
    }

    pub fn window(&self) -> &PartitionWindow<T> {
        &self.window
    }

    pub fn tau(&self) -> T {
        self.window.tau
    }

    pub fn floor(&self) -> T {
        self.floor
    }

    pub fn indices(&self) -> impl Iterator<Item = DyadicIndex> + '_ {
        let cap = self.window.j_cap();
        self.window.rows().flat_map(move |i| (0..=cap).map(move |j| DyadicIndex::new(i, j)))
    }

    pub fn get(&self, idx: DyadicIndex) -> Result<T> {
        if !self.window.contains(idx) {
            return Err(Error::OutsideWindow { i: idx.i, j: idx.j });
        }
        Ok(self.values.at((idx.i - self.window.i_min) as usize, idx.j as usize))
    }

    /// Entry with both indices clamped into the window.
    pub fn get_clamped(&self, i: i64, j: i64) -> T {
        let r = (i.clamp(self.window.i_min, self.window.i_max) - self.window.i_min) as usize;
        let c = j.clamp(0, self.window.j_cap()) as usize;
        self.values.at(r, c)
    }

    fn row_slot(&self, i: i64) -> Option<usize> {
        (i >= self.window.i_min && i <= self.window.i_max).then(|| (i - self.window.i_min) as usize)
    }

    /// Row sum `ε_i`.
    pub fn row_sum(&self, i: i64) -> Option<T> {
        self.row_slot(i).map(|r| self.row_sums[r])
    }

    /// Row sum with the row clamped into the window.
    pub fn row_sum_clamped(&self, i: i64) -> T {
        let r = (i.clamp(self.window.i_min, self.window.i_max) - self.window.i_min) as usize;
        self.row_sums[r]
    }

    /// Threshold `j(i)`.
    pub fn threshold(&self, i: i64) -> Option<i64> {
        self.row_slot(i).map(|r| self.thresholds[r])
    }

    pub fn threshold_clamped(&self, i: i64) -> i64 {
        let r = (i.clamp(self.window.i_min, self.window.i_max) - self.window.i_min) as usize;
        self.thresholds[r]
    }

    /// Real-valued preliminary threshold `j₀(i)`.
    pub fn guess(&self, i: i64) -> Option<T> {
        self.row_slot(i).map(|r| self.guesses[r])
    }

    pub fn l1(&self) -> T {
        self.values.data.iter().fold(T::zero(), |a, &b| a + b)
    }

    pub fn max(&self) -> T {
        self.values.data.iter().fold(T::zero(), |a, &b| a.max(b))
    }

    pub fn iter(&self) -> impl Iterator<Item = (DyadicIndex, T)> + '_ {
        self.indices().map(move |idx| (idx, self.get(idx).expect("in window")))
    }

    /// Measured constants of the six table properties against `alpha`.
    pub fn audit(&self, alpha: &AlphaTable<T>) -> EpsilonAudit {
        let f = |v: T| v.to_f64_lossy();
        let tau = f(self.tau());
        let cap = self.window.j_cap();
        let idx: Vec<DyadicIndex> = self.indices().collect();
        let mut audit = EpsilonAudit {
            dominance_slack: f64::INFINITY,
            lipschitz: 0.0,
            l1: f(self.l1()),
            row_upper: 0.0,
            cap_lower: f64::INFINITY,
            peak_lower: f64::INFINITY,
            threshold_law: true,
            guess_gap: 0.0,
        };
        for a in &idx {
            let ea = f(self.get(*a).unwrap());
            let al = f(alpha.get(*a).unwrap_or(T::zero()));
            audit.dominance_slack = audit.dominance_slack.min(ea - al);
            for b in &idx {
                let d = ((a.i - b.i).abs() + (a.j - b.j).abs()) as f64;
                if d > 0.0 {
                    let eb = f(self.get(*b).unwrap());
                    audit.lipschitz = audit.lipschitz.max((ea.ln() - eb.ln()).abs() / d);
                }
            }
        }
        for i in self.window.rows() {
            let sum = f(self.row_sum(i).unwrap());
            let ji = self.threshold(i).unwrap();
            for j in 0..=cap {
                let e = f(self.get(DyadicIndex::new(i, j)).unwrap());
                audit.row_upper = audit.row_upper.max(e / sum);
                let bound = (-(j as f64)).exp() / tau.sqrt();
                let ok = if j <= ji { ji == 0 || e <= bound } else { e > bound };
                audit.threshold_law &= ok;
            }
            audit.cap_lower = audit.cap_lower.min(f(self.get(DyadicIndex::new(i, cap)).unwrap()) / sum);
            audit.peak_lower = audit.peak_lower.min(f(self.get(DyadicIndex::new(i, ji)).unwrap()) / sum);
            audit.guess_gap = audit.guess_gap.max((f(self.guess(i).unwrap()) - ji as f64).abs());
        }
        audit
    }
}

/// Achieved constants for the regularized-table properties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonAudit {
    /// `min(ε_ij − α_ij)`, nonnegative when the table dominates.
    pub dominance_slack: f64,
    /// Largest `|ln ε_a − ln ε_b| / |a − b|₁`.
    pub lipschitz: f64,
    /// Total mass `Σ ε_ij`.
    pub l1: f64,
    /// Largest `ε_ij / ε_i`.
    pub row_upper: f64,
    /// Smallest `ε_{i,cap} / ε_i`.
    pub cap_lower: f64,
    /// Smallest `ε_{i,j(i)} / ε_i`.
    pub peak_lower: f64,
    /// Whether every row obeys the threshold law.
    pub threshold_law: bool,
    /// Largest `|j₀(i) − j(i)|`.
    pub guess_gap: f64,
}

impl EpsilonAudit {
    pub fn passes(&self) -> bool {
        self.dominance_slack >= 0.0
            && self.lipschitz <= 0.5 + 1e-12
            && self.threshold_law
            && self.guess_gap <= 2.0
            && self.peak_lower > 0.0
            && self.cap_lower > 0.0
    }
}

/// Largest `j` with `ε_ij ≤ e^{-j}τ^{-1/2}`, or 0; errors when an earlier
/// index already violates the bound.
fn crossing<T: Scalar>(row: &[T], tau: T, i: i64) -> Result<i64> {
    let inv = T::one() / tau.sqrt();
    let below = |j: usize| row[j] <= (-T::from_usize_lossy(j)).exp() * inv;
    let last_below = (0..row.len()).rev().find(|&j| below(j));
    let Some(last) = last_below else {
        return Ok(0);
    };
    if let Some(first_above) = (0..last).find(|&j| !below(j)) {
        return Err(Error::NonUniqueCrossing { row: i, last_below: last as i64, first_above: first_above as i64 });
    }
    Ok(last as i64)
}

/// Smallest ½-log-Lipschitz majorant: `max_kl ε_kl e^{-½|·|₁}`.
fn lipschitz_envelope<T: Scalar>(g: &Grid<T>) -> Grid<T> {
    let half = T::c(0.5);
    let mut out = g.clone();
    for r in 0..g.rows {
        for c in 0..g.cols {
            let mut best = T::zero();
            for k in 0..g.rows {
                for l in 0..g.cols {
                    let d = T::from_usize_lossy(r.abs_diff(k) + c.abs_diff(l));
                    best = best.max(g.at(k, l) * (-half * d).exp());
                }
            }
            out.set(r, c, best);
        }
    }
    out
}

/// Full regularization of a normalized table.
pub fn finalize<T: Scalar>(alpha: &AlphaTable<T>) -> Result<EpsilonTable<T>> {
    check_window(&alpha.window)?;
    let tau = alpha.window.tau;
    let m = mollify(alpha);
    let (rows, cols) = (m.values.rows, m.values.cols);
    let floor = epsilon_floor(tau);
    let guesses: Vec<T> = m.row_sums.iter().map(|&s| threshold_guess(s, tau)).collect();
    let mut raw = Grid::filled(rows, cols, floor);
    for r in 0..rows {
        for c in 0..cols {
            let boost = T::c(2.0) * (T::c(-0.5) * (T::from_usize_lossy(c) - guesses[r]).abs()).exp() * m.row_sums[r];
            raw.set(r, c, m.values.at(r, c).max(boost).max(floor));
        }
    }
    let values = lipschitz_envelope(&raw);
    EpsilonTable::assemble(alpha.window, values, Some(guesses), floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn window(lt: f64, extra: i64) -> PartitionWindow<f64> {
        let w = PartitionWindow::new(lt.exp(), 0).unwrap();
        PartitionWindow::new(lt.exp(), w.i_min + extra).unwrap()
    }

    #[test]
    fn zero_alpha_gives_floor() {
        let w = window(8.0, 3);
        let m = mollify(&AlphaTable::zeros(w));
        assert!(m.values.data.iter().all(|&v| v == 0.0));
        let eps = finalize(&AlphaTable::zeros(w)).unwrap();
        let floor = epsilon_floor(w.tau);
        assert!(eps.iter().all(|(_, v)| v == floor));
        // floor sits under every threshold, so rows cross at the cap
        for i in w.rows() {
            assert_eq!(eps.threshold(i), Some(w.j_cap()));
        }
    }

    #[test]
    fn single_spike_matches_cone() {
        let w = window(6.0, 4);
        let spike = DyadicIndex::new(w.i_min + 2, 1);
        let alpha = AlphaTable::from_fn(w, |idx| if idx == spike { 1.0 } else { 0.0 }).unwrap();
        let m = mollify(&alpha);
        let cap = w.j_cap();
        for i in w.rows() {
            let cone_row: f64 = (0..=cap)
                .map(|j| (-0.5 * (((i - spike.i).abs() + (j - spike.j).abs()) as f64)).exp())
                .sum();
            for j in 0..=cap {
                let d = ((i - spike.i).abs() + (j - spike.j).abs()) as f64;
                let expect = (-0.5 * d).exp() + (-0.5 * ((j - cap).abs() as f64)).exp() * cone_row;
                assert_relative_eq!(m.get(DyadicIndex::new(i, j)), expect, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn two_spikes_take_pointwise_max() {
        let w = window(8.0, 4);
        let a = DyadicIndex::new(w.i_min, 0);
        let b = DyadicIndex::new(w.i_max, 5);
        let alpha = AlphaTable::from_fn(w, |idx| if idx == a || idx == b { 0.4 } else { 0.0 }).unwrap();
        let m = mollify(&alpha);
        for idx in alpha.indices() {
            let da = ((idx.i - a.i).abs() + (idx.j - a.j).abs()) as f64;
            let db = ((idx.i - b.i).abs() + (idx.j - b.j).abs()) as f64;
            let expect = 0.4 * (-0.5 * da).exp().max((-0.5 * db).exp());
            assert_relative_eq!(m.cone(idx), expect, max_relative = 1e-14);
        }
    }

    #[test]
    fn guess_branches() {
        let tau = 8.0f64.exp();
        assert_eq!(threshold_guess(tau.sqrt().recip(), tau), 0.0);
        assert_relative_eq!(threshold_guess(1.0 / tau, tau), 0.5 * tau.ln(), max_relative = 1e-14);
        assert_relative_eq!(threshold_guess(tau.powf(-0.75), tau), 0.25 * tau.ln(), max_relative = 1e-12);
        assert_relative_eq!(threshold_guess(0.5 / tau, tau), 4.0, max_relative = 1e-14);
    }

    /// Scalar re-derivation of the table without grids, for comparison.
    fn scalar_reference(alpha: &AlphaTable<f64>) -> Vec<f64> {
        let w = *alpha.window();
        let cap = w.j_cap();
        let tau = w.tau;
        let idx: Vec<_> = alpha.indices().collect();
        let cone = |p: DyadicIndex| {
            idx.iter()
                .map(|q| alpha.get(*q).unwrap() * (-0.5 * (((p.i - q.i).abs() + (p.j - q.j).abs()) as f64)).exp())
                .fold(0.0, f64::max)
        };
        let pre_sum = |i: i64| (0..=cap).map(|j| cone(DyadicIndex::new(i, j))).sum::<f64>();
        let aug = |p: DyadicIndex| cone(p) + (-0.5 * ((p.j - cap).abs() as f64)).exp() * pre_sum(p.i);
        let raw = |p: DyadicIndex| {
            let s: f64 = (0..=cap).map(|j| aug(DyadicIndex::new(p.i, j))).sum();
            let j0 = if s < 1.0 / tau {
                tau.ln() / 2.0
            } else if s < tau.powf(-0.5) {
                -(s * tau.sqrt()).ln()
            } else {
                0.0
            };
            aug(p).max(2.0 * (-0.5 * (p.j as f64 - j0).abs()).exp() * s).max(tau.powi(-2))
        };
        let raws: Vec<f64> = idx.iter().map(|p| raw(*p)).collect();
        idx.iter()
            .map(|p| {
                idx.iter()
                    .zip(&raws)
                    .map(|(q, r)| r * (-0.5 * (((p.i - q.i).abs() + (p.j - q.j).abs()) as f64)).exp())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    #[test]
    fn spike_table_matches_scalar_reference() {
        let w = window(8.0, 3);
        let spike = DyadicIndex::new(w.i_min + 1, 0);
        let alpha = AlphaTable::from_fn(w, |idx| if idx == spike { 1.0 } else { 0.0 }).unwrap();
        let eps = finalize(&alpha).unwrap();
        let reference = scalar_reference(&alpha);
        for ((_, got), want) in eps.iter().zip(reference) {
            assert_relative_eq!(got, want, max_relative = 1e-13);
        }
        assert!(eps.audit(&alpha).passes());
    }

    #[test]
    fn threshold_boost_alone_can_break_slow_variation() {
        // neighbouring rows whose guesses move by a full level: the boost term
        // alone jumps by more than ½ in log, which the envelope removes
        let w = window(8.0, 3);
        let alpha = AlphaTable::from_fn(w, |idx| {
            if idx == DyadicIndex::new(w.i_min + 1, 6) { 3e-4 } else { 0.0 }
        })
        .unwrap();
        let m = mollify(&alpha);
        let tau = w.tau;
        let mut worst: f64 = 0.0;
        for i in w.i_min..w.i_max {
            for j in 0..=w.j_cap() {
                let boost = |i: i64| {
                    let s = m.row_sum(i);
                    2.0 * (-0.5 * (j as f64 - threshold_guess(s, tau)).abs()).exp() * s
                };
                worst = worst.max((boost(i).ln() - boost(i + 1).ln()).abs());
            }
        }
        assert!(worst > 0.5, "boost variation {worst}");
        let eps = finalize(&alpha).unwrap();
        assert!(eps.audit(&alpha).lipschitz <= 0.5 + 1e-12);
    }

    #[test]
    fn f32_tables_build() {
        let w = PartitionWindow::new(6.0f32.exp(), 4).unwrap();
        let alpha = AlphaTable::from_fn(w, |idx| if idx.j == 1 && idx.i == 3 { 0.1 } else { 0.0 }).unwrap();
        let eps = finalize(&alpha).unwrap();
        assert!(eps.iter().all(|(_, v)| v > 0.0));
    }

    #[test]
    fn outside_index_rejected() {
        let w = window(4.0, 2);
        let eps = finalize(&AlphaTable::zeros(w)).unwrap();
        assert!(eps.get(DyadicIndex::new(w.i_max + 1, 0)).is_err());
        assert!(eps.get(DyadicIndex::new(w.i_min, w.j_cap() + 1)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn mollifier_is_monotone(seed in any::<u64>(), bump in 0.0f64..0.5) {
            let w = window(6.0, 4);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = AlphaTable::random_spikes(w, &mut rng);
            let b = AlphaTable::from_fn(w, |idx| {
                let v = a.get(idx).unwrap();
                if (idx.i + idx.j) % 3 == 0 { v + bump } else { v }
            }).unwrap();
            let (ma, mb) = (mollify(&a), mollify(&b));
            for idx in a.indices() {
                prop_assert!(ma.get(idx) <= mb.get(idx) * (1.0 + 1e-15));
            }
        }

        #[test]
        fn random_tables_satisfy_invariants(seed in any::<u64>(), which in 0usize..3) {
            let lt = [4.0, 6.0, 8.0][which];
            let w = window(lt, 4);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let alpha = AlphaTable::random_spikes(w, &mut rng);
            prop_assert!(alpha.is_normalized());
            let eps = finalize(&alpha).unwrap();
            let audit = eps.audit(&alpha);
            prop_assert!(audit.passes(), "{:?}", audit);
        }
    }
}
