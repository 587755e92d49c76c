//! Convex temporal weight `h(s)`.
//!
//! `h'` is a sum of three parts: a half-integer base level `τ₀`, a slowly
//! growing drift whose derivative is `κ ρ q̃(s)` with `q̃` the log-linear
//! interpolation of the row masses `q_i = min(ε_i τ, τ)`, and smooth
//! `tanh` steps, one per row that owns integer crossings of `h'`.
//! Rows without steps are plateaus; the step heights absorb the drift so
//! that every plateau sits on a half-integer level on average.

use crate::error::{Error, Result};
use crate::regularize::EpsilonTable;
use crate::Scalar;

/// Tuning knobs of the construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HConfig {
    /// Coefficient of the drift density `κ ρ q̃`.
    pub kappa: f64,
    /// Largest drift of `h'` allowed across one plateau run.
    pub drift_budget: f64,
    /// Width of the `tanh` steps.
    pub width: f64,
}

impl Default for HConfig {
    fn default() -> Self {
        Self { kappa: 0.25, drift_budget: 0.02, width: 0.5 }
    }
}

/// `(e^x - 1)/x` and `(e^x - 1 - x)/x²`, stable near zero.
fn phi12<T: Scalar>(x: T) -> (T, T) {
    if x.abs() < T::c(1e-3) {
        let e1 = T::one() + x * (T::c(0.5) + x * (T::c(1.0 / 6.0) + x * T::c(1.0 / 24.0)));
        let e2 = T::c(0.5) + x * (T::c(1.0 / 6.0) + x * (T::c(1.0 / 24.0) + x * T::c(1.0 / 120.0)));
        (e1, e2)
    } else {
        let m = x.exp_m1();
        (m / x, (m - x) / (x * x))
    }
}

/// Positive density (the row masses `q`) whose logarithm is piecewise linear, with closed-form
/// first and second antiderivatives anchored at `origin`.
#[derive(Debug, Clone, PartialEq)]
struct LogLinear<T: Scalar> {
    knots: Vec<T>,
    logs: Vec<T>,
    slopes: Vec<T>,
    cum1: Vec<T>,
    cum2: Vec<T>,
}

impl<T: Scalar> LogLinear<T> {
    /// Density through `(x_k, exp(l_k))`, flat before the first and after the
    /// last point, integrated from `origin ≤ x_0`.
    fn new(origin: T, points: &[(T, T)]) -> Self {
        let mut knots = vec![origin];
        let mut logs = vec![points[0].1];
        for &(x, l) in points {
            knots.push(x);
            logs.push(l);
        }
        let mut slopes = Vec::with_capacity(knots.len());
        for k in 0..knots.len() {
            let b = if k + 1 < knots.len() && knots[k + 1] > knots[k] {
                (logs[k + 1] - logs[k]) / (knots[k + 1] - knots[k])
            } else {
                T::zero()
            };
            slopes.push(b);
        }
        let mut cum1 = vec![T::zero()];
        let mut cum2 = vec![T::zero()];
        for k in 0..knots.len() - 1 {
            let (i1, i2) = Self::segment(logs[k], slopes[k], knots[k + 1] - knots[k], cum1[k], cum2[k]);
            cum1.push(i1);
            cum2.push(i2);
        }
        Self { knots, logs, slopes, cum1, cum2 }
    }

    fn segment(l: T, b: T, d: T, c1: T, c2: T) -> (T, T) {
        let (e1, e2) = phi12(b * d);
        let el = l.exp();
        (c1 + el * d * e1, c2 + c1 * d + el * d * d * e2)
    }

    fn seg_of(&self, s: T) -> usize {
        self.knots.partition_point(|&k| k <= s).saturating_sub(1)
    }

    /// Density, its derivative, first and second antiderivative.
    fn eval(&self, s: T) -> [T; 4] {
        let k = self.seg_of(s);
        let d = s - self.knots[k];
        let (l, b) = (self.logs[k], self.slopes[k]);
        let dens = (l + b * d).exp();
        let (i1, i2) = Self::segment(l, b, d, self.cum1[k], self.cum2[k]);
        [dens, b * dens, i1, i2]
    }
}

/// Values of the smooth unit step `σ(z) = (1 + tanh z)/2` and relatives.
struct StepParts<T> {
    sigma: T,
    sech2: T,
    tanh: T,
    integral: T,
}

fn step_parts<T: Scalar>(z: T) -> StepParts<T> {
    let one = T::one();
    let e = (T::c(-2.0) * z.abs()).exp();
    let sech2 = T::c(4.0) * e / ((one + e) * (one + e));
    let th = (one - e) / (one + e);
    let tanh = if z < T::zero() { -th } else { th };
    let sigma = if z >= T::zero() { one / (one + e) } else { e / (one + e) };
    let lncosh = z.abs() + e.ln_1p() - T::LN_2();
    StepParts { sigma, sech2, tanh, integral: T::c(0.5) * (z + lncosh) }
}

/// One `tanh` step of `h'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step<T> {
    pub center: T,
    pub height: T,
    /// Integer crossings attributed to the step.
    pub count: i64,
}

/// Temporal weight with analytic derivatives up to third order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightH<T: Scalar> {
    tau: T,
    base_level: T,
    offset: T,
    kappa_rho: T,
    rescale: T,
    width: T,
    s_min: T,
    s_max: T,
    i_min: i64,
    drift: LogLinear<T>,
    steps: Vec<Step<T>>,
    plateau_rows: Vec<i64>,
    row_factors: Vec<T>,
    h_at_start: T,
}

/// Build `h` on `s ∈ [i_min, i_max + 1]` with default tuning.
pub fn build_h<T: Scalar>(eps: &EpsilonTable<T>) -> Result<WeightH<T>> {
    build_h_with(eps, HConfig::default())
}

/// Build `h` with explicit tuning.
pub fn build_h_with<T: Scalar>(eps: &EpsilonTable<T>, cfg: HConfig) -> Result<WeightH<T>> {
    let window = *eps.window();
    let tau = window.tau;
    let kappa = T::c(cfg.kappa);
    let width = T::c(cfg.width);
    let half = T::c(0.5);
    let rows: Vec<i64> = window.rows().collect();
    let nrows = rows.len();
    let q: Vec<T> = rows.iter().map(|&i| (eps.row_sum(i).unwrap() * tau).min(tau)).collect();
    let total_q = q.iter().fold(T::zero(), |a, &b| a + b);

    // leave room for forced steps, the base level offset and the drift
    let slack = T::c(2.5) + T::from_usize_lossy(nrows);
    let available = tau - slack;
    let demand = (T::one() + kappa * T::c(0.5).exp()) * total_q;
    if available <= T::zero() {
        return Err(Error::BudgetExceeded {
            requested: (demand + slack).to_f64_lossy(),
            available: tau.to_f64_lossy(),
            rescale: 0.0,
        });
    }
    let rescale = if demand > available { available / demand } else { T::one() };
    let kappa_rho = kappa * rescale;

    let s_min = T::from_i64_lossy(window.i_min);
    let s_max = T::from_i64_lossy(window.i_max + 1);
    let centers: Vec<T> = rows.iter().map(|&i| T::from_i64_lossy(i) + half).collect();
    let points: Vec<(T, T)> =
        centers.iter().zip(&q).map(|(&c, &qi)| (c, qi.max(T::min_positive_value()).ln())).collect();
    let drift = LogLinear::new(s_min, &points);
    let drift_at = |s: T| kappa_rho * drift.eval(s)[2];

    // integer crossings per row from the cumulative rescaled mass
    let mut counts = Vec::with_capacity(nrows);
    let mut cum = T::zero();
    let mut prev = 0i64;
    for &qi in &q {
        cum += rescale * qi;
        let fl = cum.floor().to_i64().unwrap_or(0);
        counts.push(fl - prev);
        prev = fl;
    }
    // split plateau runs whose drift would exceed the budget
    let budget = T::c(cfg.drift_budget);
    let mut run = T::zero();
    for (k, &i) in rows.iter().enumerate() {
        let fi = T::from_i64_lossy(i);
        let mass = drift_at(fi + T::one()) - drift_at(fi);
        if counts[k] > 0 {
            run = T::zero();
        } else if run + mass > budget {
            counts[k] = 1;
            run = T::zero();
        } else {
            run += mass;
        }
    }

    // reference levels: plateau runs, or the start if the first row steps
    struct Reference<T> {
        drift: T,
        crossings: i64,
        after_row: usize,
    }
    let mut refs: Vec<Reference<T>> = Vec::new();
    let mut crossings = 0i64;
    if counts[0] > 0 {
        refs.push(Reference { drift: T::zero(), crossings: 0, after_row: 0 });
    }
    let mut k = 0;
    while k < nrows {
        if counts[k] == 0 {
            let start = k;
            while k < nrows && counts[k] == 0 {
                k += 1;
            }
            let a = drift_at(T::from_i64_lossy(rows[start]));
            let b = drift_at(T::from_i64_lossy(rows[k - 1]) + T::one());
            refs.push(Reference { drift: half * (a + b), crossings, after_row: k });
        } else {
            crossings += counts[k];
            k += 1;
        }
    }
    let offset = refs[0].drift;

    let mut heights: Vec<T> = counts.iter().map(|&c| T::from_i64_lossy(c)).collect();
    for pair in refs.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        let dn = hi.crossings - lo.crossings;
        if dn == 0 {
            continue;
        }
        let factor = (T::from_i64_lossy(dn) - (hi.drift - lo.drift)) / T::from_i64_lossy(dn);
        for kk in lo.after_row..hi.after_row {
            heights[kk] *= factor;
        }
    }
    if heights.iter().any(|&h| h < T::zero()) {
        return Err(Error::Domain("drift exceeds the step budget between plateaus".into()));
    }

    let steps: Vec<Step<T>> = (0..nrows)
        .filter(|&k| counts[k] > 0)
        .map(|k| Step { center: centers[k], height: heights[k], count: counts[k] })
        .collect();
    let plateau_rows = (0..nrows).filter(|&k| counts[k] == 0).map(|k| rows[k]).collect();
    let row_factors = rows.iter().zip(&q).map(|(&i, &qi)| rescale * qi / (eps.row_sum(i).unwrap() * tau)).collect();

    // smallest half-integer clearing τ by the plateau offset
    let need = tau + offset + T::c(1e-9);
    let mut base_level = need.floor() + half;
    if base_level < need {
        base_level += T::one();
    }

    let mut h = WeightH {
        tau,
        base_level,
        offset,
        kappa_rho,
        rescale,
        width,
        s_min,
        s_max,
        i_min: window.i_min,
        drift,
        steps,
        plateau_rows,
        row_factors,
        h_at_start: T::zero(),
    };
    h.h_at_start = h.raw(s_min)[0];
    let top = h.eval(s_max)[1];
    if top > T::c(2.0) * tau {
        return Err(Error::BudgetExceeded {
            requested: (top - base_level).to_f64_lossy(),
            available: tau.to_f64_lossy(),
            rescale: rescale.to_f64_lossy(),
        });
    }
    Ok(h)
}

impl<T: Scalar> WeightH<T> {
    fn raw(&self, s: T) -> [T; 4] {
        let [dens, ddens, b1, b2] = self.drift.eval(s).map(|v| v * self.kappa_rho);
        let level = self.base_level - self.offset;
        let mut out = [level * (s - self.s_min) + b2, level + b1, dens, ddens];
        let w = self.width;
        for st in &self.steps {
            let p = step_parts((s - st.center) / w);
            out[0] += st.height * w * p.integral;
            out[1] += st.height * p.sigma;
            out[2] += st.height / (T::c(2.0) * w) * p.sech2;
            out[3] -= st.height / (w * w) * p.sech2 * p.tanh;
        }
        out
    }

    /// `[h, h', h'', h''']` at `s`, normalized by `h(s_min) = 0`.
    pub fn eval(&self, s: T) -> [T; 4] {
        let mut v = self.raw(s);
        v[0] -= self.h_at_start;
        v
    }

    pub fn value(&self, s: T) -> T {
        self.eval(s)[0]
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    /// Domain `[s_min, s_max]`.
    pub fn domain(&self) -> (T, T) {
        (self.s_min, self.s_max)
    }

    /// Half-integer level of the first plateau.
    pub fn base_level(&self) -> T {
        self.base_level
    }

    /// Budget rescale factor applied to the row masses.
    pub fn rescale(&self) -> T {
        self.rescale
    }

    /// Drift coefficient `κρ`.
    pub fn drift_coefficient(&self) -> T {
        self.kappa_rho
    }

    pub fn steps(&self) -> &[Step<T>] {
        &self.steps
    }

    /// Step centers and row boundaries, in increasing order.
    pub fn knots(&self) -> Vec<T> {
        let mut k: Vec<T> = (0..=(self.s_max - self.s_min).round().to_i64().unwrap_or(0))
            .map(|m| self.s_min + T::from_i64_lossy(m))
            .collect();
        k.extend(self.steps.iter().map(|s| s.center));
        k.sort_by(|a, b| a.partial_cmp(b).unwrap());
        k
    }

    /// Rows without steps.
    pub fn plateau_rows(&self) -> &[i64] {
        &self.plateau_rows
    }

    /// Per-row ratio `ρ q_i / (ε_i τ)` between the mass `h` spends on a row
    /// and the raw row mass, rows in window order.
    pub fn row_factors(&self) -> &[T] {
        &self.row_factors
    }

    /// Row containing `s`, clamped to the domain.
    pub fn row_of(&self, s: T) -> i64 {
        let last = (self.s_max - T::one()).to_i64().unwrap_or(self.i_min);
        s.floor().to_i64().unwrap_or(self.i_min).clamp(self.i_min, last)
    }
}

/// Distance to the nearest natural number.
pub fn dist_to_naturals<T: Scalar>(x: T) -> T {
    if x <= T::zero() {
        return -x;
    }
    (x - x.round()).abs()
}

/// Measured constants of the temporal weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HAudit {
    pub min_slope_over_tau: f64,
    pub max_slope_over_tau: f64,
    pub min_second: f64,
    /// `min (h'' + dist(h', ℕ))` over all samples.
    pub min_gap: f64,
    /// `min (h'' + dist(h', ℕ)) − ¼` over plateau rows.
    pub plateau_margin: f64,
    /// `min h'' / (ε_i τ)`.
    pub lower: f64,
    /// `max h'' / (ε_i τ + 1)`.
    pub upper: f64,
    /// `max |h'''| / h''`.
    pub third_ratio: f64,
    pub samples: usize,
}

/// Sample `h` at `per_unit` points per unit interval and measure the
/// constants of its defining properties.
pub fn audit_h<T: Scalar>(h: &WeightH<T>, eps: &EpsilonTable<T>, per_unit: usize) -> HAudit {
    let f = |v: T| v.to_f64_lossy();
    let tau = f(h.tau);
    let (a, b) = (f(h.s_min), f(h.s_max));
    let n = ((b - a) * per_unit as f64).round() as usize;
    let mut out = HAudit {
        min_slope_over_tau: f64::INFINITY,
        max_slope_over_tau: 0.0,
        min_second: f64::INFINITY,
        min_gap: f64::INFINITY,
        plateau_margin: f64::INFINITY,
        lower: f64::INFINITY,
        upper: 0.0,
        third_ratio: 0.0,
        samples: n + 1,
    };
    for k in 0..=n {
        let s = a + (b - a) * k as f64 / n as f64;
        let [_, d1, d2, d3] = h.eval(T::c(s));
        let (d1, d2, d3) = (f(d1), f(d2), f(d3));
        let row = h.row_of(T::c(s));
        let mass = f(eps.row_sum(row).unwrap()) * tau;
        out.min_slope_over_tau = out.min_slope_over_tau.min(d1 / tau);
        out.max_slope_over_tau = out.max_slope_over_tau.max(d1 / tau);
        out.min_second = out.min_second.min(d2);
        let gap = d2 + f(dist_to_naturals(T::c(d1)));
        out.min_gap = out.min_gap.min(gap);
        if h.plateau_rows.contains(&row) {
            out.plateau_margin = out.plateau_margin.min(gap - 0.25);
        }
        out.lower = out.lower.min(d2 / mass);
        out.upper = out.upper.max(d2 / (mass + 1.0));
        if d2 > 0.0 {
            out.third_ratio = out.third_ratio.max(d3.abs() / d2);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{DyadicIndex, PartitionWindow};
    use crate::regularize::{finalize, AlphaTable};
    use approx::assert_relative_eq;

    fn floor_table(lt: f64, rows: i64) -> EpsilonTable<f64> {
        let w0 = PartitionWindow::new(lt.exp(), 0).unwrap();
        let w = PartitionWindow::new(lt.exp(), w0.i_min + rows - 1).unwrap();
        finalize(&AlphaTable::zeros(w)).unwrap()
    }

    fn fd(f: impl Fn(f64) -> f64, s: f64, d: f64) -> f64 {
        (f(s - 2.0 * d) - 8.0 * f(s - d) + 8.0 * f(s + d) - f(s + 2.0 * d)) / (12.0 * d)
    }

    #[test]
    fn derivatives_are_consistent() {
        let w = PartitionWindow::new(6.0f64.exp(), 6).unwrap();
        let spike = DyadicIndex::new(3, 2);
        let eps = finalize(&AlphaTable::from_fn(w, |i| if i == spike { 0.5 } else { 0.0 }).unwrap()).unwrap();
        let h = build_h(&eps).unwrap();
        for k in 0..40 {
            let s = 2.05 + 0.1 * k as f64;
            let v = h.eval(s);
            for d in 0..3 {
                let num = fd(|x| h.eval(x)[d], s, 1e-3);
                assert_relative_eq!(v[d + 1], num, max_relative = 1e-6, epsilon = 1e-7);
            }
        }
        assert_eq!(h.eval(2.0)[0], 0.0);
    }

    #[test]
    fn floor_table_without_drift_is_one_plateau() {
        let eps = floor_table(4.0, 5);
        let cfg = HConfig { kappa: 0.0, ..HConfig::default() };
        let h = build_h_with(&eps, cfg).unwrap();
        assert!(h.steps().is_empty());
        let tau = 4.0f64.exp();
        let level = h.base_level();
        assert!(level >= tau && (level - level.floor() - 0.5).abs() < 1e-12);
        let audit = audit_h(&h, &eps, 1000);
        assert_eq!(audit.min_second, 0.0);
        assert_relative_eq!(audit.plateau_margin, 0.25, epsilon = 1e-12);
        assert_relative_eq!(audit.min_slope_over_tau, level / tau, max_relative = 1e-14);
    }

    #[test]
    fn one_heavy_row_gives_one_ramp() {
        let tau = 4.0f64.exp();
        let w0 = PartitionWindow::new(tau, 0).unwrap();
        let w = PartitionWindow::new(tau, w0.i_min + 4).unwrap();
        let heavy = w.i_min + 2;
        let cap = w.j_cap() as f64 + 1.0;
        let eps = EpsilonTable::from_fn(w, |idx| {
            if idx.i == heavy { tau.powf(-0.5) / cap } else { tau.powi(-2) }
        })
        .unwrap();
        let h = build_h(&eps).unwrap();
        let big: Vec<_> = h.steps().iter().filter(|s| s.count > 1).collect();
        assert_eq!(big.len(), 1);
        assert_eq!(big[0].center, heavy as f64 + 0.5);
        assert!((big[0].count as f64 - tau.sqrt()).abs() <= 1.0);
        // trapezoid mass of h'' against the closed-form total rise
        let (a, b) = h.domain();
        let n = 20000;
        let dx = (b - a) / n as f64;
        let mut mass = 0.0;
        for k in 0..=n {
            let wgt = if k == 0 || k == n { 0.5 } else { 1.0 };
            mass += wgt * h.eval(a + dx * k as f64)[2] * dx;
        }
        assert_relative_eq!(mass, h.eval(b)[1] - h.eval(a)[1], max_relative = 1e-7);
    }

    #[test]
    fn slope_window_and_gap_on_spike_tables() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let w = PartitionWindow::new(4.0f64.exp(), 7).unwrap();
            let eps = finalize(&AlphaTable::random_spikes(w, &mut rng)).unwrap();
            let h = build_h(&eps).unwrap();
            let a = audit_h(&h, &eps, 1000);
            assert!(a.min_slope_over_tau >= 1.0 && a.max_slope_over_tau <= 2.0, "{a:?}");
            assert!(a.min_second >= 0.0);
            assert!(a.min_gap > 0.25, "{a:?}");
            assert!(a.plateau_margin >= 0.24, "{a:?}");
        }
    }

    #[test]
    fn f32_weight_builds() {
        let w = PartitionWindow::new(4.0f32.exp(), 5).unwrap();
        let eps = finalize(&AlphaTable::zeros(w)).unwrap();
        let h = build_h(&eps).unwrap();
        assert!(h.eval(3.5)[1] >= 4.0f32.exp());
    }
}
