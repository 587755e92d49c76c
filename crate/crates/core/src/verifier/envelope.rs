//! Envelope of the heat-side weight `W(t, x) = exp(ψ(−ln t/4, 2x/√t) − |x|²/8t)`
//! on the sets used to pass from the Carleman estimate to decay.
//!
//! Nothing here is asserted: the sets lie partly outside the window the
//! weight was built on, where `h` is continued by its closed form.

use crate::weights::Psi;

/// Log-weight extremes and margins, all in units of `ln W`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub tau: f64,
    /// Range of `h(s) / (τ (s − s_min))` over the window.
    pub sandwich: (f64, f64),
    /// `max δ₂ φ / (τ + |x|²/t)`.
    pub correspondence: f64,
    /// `(δ, max ln W)` over `t ≤ 2δ², |x| ≤ 2δ` minus `[0, δ²] × B(δ)`.
    pub near_origin: Vec<(f64, f64)>,
    /// `max ln W` is nondecreasing as `δ` shrinks.
    pub near_origin_monotone: bool,
    /// `max ln W` over `t ∈ [1/τ, 2/τ]` or `1 ≤ |x| ≤ 2`.
    pub exterior_max: f64,
    /// `min ln W` over `t ∈ [1/16τ, 1/8τ]`, `|x| ≤ ¼`.
    pub interior_min: f64,
    /// `(interior_min − exterior_max) / τ`.
    pub margin: f64,
    /// The same margin for the time weight alone.
    pub flat_margin: f64,
}

impl EnvelopeReport {
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("sandwich {:.6e} {:.6e}", self.sandwich.0, self.sandwich.1),
            format!("correspondence {:.6e}", self.correspondence),
        ];
        for (d, v) in &self.near_origin {
            out.push(format!("near_origin delta={d:.1e} max_log_weight={v:.6e}"));
        }
        out.push(format!("near_origin_monotone {}", self.near_origin_monotone));
        out.push(format!(
            "compare exterior_max={:.6e} interior_min={:.6e} margin/tau={:.6e} flat_margin/tau={:.6e}",
            self.exterior_max, self.interior_min, self.margin, self.flat_margin
        ));
        out
    }
}

fn geometric(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
}

fn linear(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
}

/// Extreme of `ln W` over a rectangle of `(t, |x|)`, skipping points where `skip` holds.
fn extreme(
    log_weight: &impl Fn(f64, f64) -> f64,
    t: (f64, f64),
    x: (f64, f64),
    skip: impl Fn(f64, f64) -> bool,
    max: bool,
) -> f64 {
    let mut best = if max { f64::NEG_INFINITY } else { f64::INFINITY };
    for tt in geometric(t.0, t.1, 160) {
        for xx in linear(x.0, x.1, 160) {
            if skip(tt, xx) {
                continue;
            }
            let v = log_weight(tt, xx);
            best = if max { best.max(v) } else { best.min(v) };
        }
    }
    best
}

fn compare(log_weight: &impl Fn(f64, f64) -> f64, tau: f64) -> (f64, f64, f64) {
    let ext_time = extreme(log_weight, (1.0 / tau, 2.0 / tau), (0.0, 2.0), |_, _| false, true);
    let ext_space = extreme(log_weight, (1e-6 / tau, 2.0 / tau), (1.0, 2.0), |_, _| false, true);
    let exterior = ext_time.max(ext_space);
    let interior = extreme(log_weight, (1.0 / (16.0 * tau), 1.0 / (8.0 * tau)), (0.0, 0.25), |_, _| false, false);
    (exterior, interior, (interior - exterior) / tau)
}

/// Samples the weight envelope of `psi` for the given `δ` values.
pub fn check_weight_envelope(psi: &Psi<f64>, deltas: &[f64]) -> EnvelopeReport {
    let tau = psi.h.tau();
    let (s_min, s_max) = psi.h.domain();
    let log_weight = |t: f64, r: f64| psi.original_weight(t, &[r]).ln();
    let flat_log_weight = |t: f64, r: f64| psi.h.value(-t.ln() / 4.0) - r * r / (8.0 * t);

    let mut sandwich = (f64::INFINITY, f64::NEG_INFINITY);
    for s in linear(s_min, s_max, 2001).skip(1) {
        let q = psi.h.value(s) / (tau * (s - s_min));
        sandwich = (sandwich.0.min(q), sandwich.1.max(q));
    }

    let mut correspondence: f64 = 0.0;
    for t in geometric((-4.0 * s_max).exp(), (-4.0 * s_min).exp(), 120) {
        for r in linear(0.0, 2.0 * (tau * t).sqrt(), 60) {
            let s = -t.ln() / 4.0;
            let y = 2.0 * r / t.sqrt();
            let part = psi.value(s, &[y]) - psi.h.value(s);
            correspondence = correspondence.max(part.abs() / (tau + r * r / t));
        }
    }

    let near_origin: Vec<(f64, f64)> = deltas
        .iter()
        .map(|&d| {
            let v = extreme(&log_weight, (1e-3 * d * d, 2.0 * d * d), (0.0, 2.0 * d), |t, r| t <= d * d && r <= d, true);
            (d, v)
        })
        .collect();
    let mut order = near_origin.clone();
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let near_origin_monotone = order.windows(2).all(|w| w[1].1 >= w[0].1);

    let (exterior_max, interior_min, margin) = compare(&log_weight, tau);
    let (_, _, flat_margin) = compare(&flat_log_weight, tau);
    EnvelopeReport {
        tau,
        sandwich,
        correspondence,
        near_origin,
        near_origin_monotone,
        exterior_max,
        interior_min,
        margin,
        flat_margin,
    }
}
