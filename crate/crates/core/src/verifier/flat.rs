//! The flat estimate in heat coordinates:
//! `‖t^{-τ-1/2} e^{-|x|²/8t} u‖ ≤ C ‖t^{-τ+1/2} e^{-|x|²/8t} (∂_t + Δ)u‖`.
//!
//! Members `w` of a Hermite-side ensemble are carried back to
//! `u(t, x) = e^{(n-4τ)s} e^{|y|²/2} w(s, y)` and both weighted norms are
//! integrated over `dt dx` with `dt = 4e^{-4s} ds`, `dx = (2√t)^n dy`.
//! Since `4t(∂_t + Δ) = −∂_s − 2y·∇_y + Δ_y` in these coordinates, the
//! source is `(∂_t + Δ)u = e^{(n-4τ)s} e^{|y|²/2} (−∂_s − H + 4τ)w / 4t`.
//! The two norms then differ by exactly `4`, so `C = 4/g₀`.

use std::time::Instant;

use num_complex::Complex;
use rayon::prelude::*;

use super::gap::{trapezoid, ExcludedSet, SeriesEnsemble};
use super::report::{BoundKind, RatioReport};
use crate::error::{Error, Result};
use crate::hermite::{HermiteBasis, SpectralSeries};
use crate::transform::heat_point;

/// Largest exponent allowed in the weights before the check refuses the grid.
const EXPONENT_CAP: f64 = 600.0;

/// Weighted heat-side norms of one member: `(left, right)` with
/// `left = ‖t^{-τ-1/2} e^{-|x|²/8t} u‖` and `right` the source side.
fn heat_norms(basis: &HermiteBasis<f64>, tau: f64, w: &SpectralSeries<f64>, dw: &SpectralSeries<f64>) -> (f64, f64) {
    let dim = basis.dim();
    let n = dim as f64;
    let g = w.grid;
    let mut left = Vec::with_capacity(g.len);
    let mut right = Vec::with_capacity(g.len);
    for (k, (f, df)) in w.frames.iter().zip(&dw.frames).enumerate() {
        let s = g.point(k);
        let lw = df.axpy(Complex::new(1.0, 0.0), &f.apply_shifted(Complex::new(4.0 * tau, 0.0)));
        let wn = f.to_nodal(basis);
        let ln = lw.to_nodal(basis);
        let mut l = 0.0;
        let mut r = 0.0;
        for q in 0..basis.node_count() {
            let y = &basis.node(q)[..dim];
            let (t, x) = heat_point(s, y);
            let y2: f64 = y.iter().map(|v| v * v).sum();
            let x2: f64 = x.iter().map(|v| v * v).sum();
            let lift = ((n - 4.0 * tau) * s + 0.5 * y2).exp();
            let u = wn[q] * lift;
            let source = ln[q] * lift / (4.0 * t);
            let gauss = (-x2 / (4.0 * t)).exp();
            // dx = (2√t)^n dy; the node weight already integrates in y
            let dx = (2.0 * t.sqrt()).powi(dim as i32) * basis.node_weight(q);
            l += t.powf(-2.0 * tau - 1.0) * gauss * u.norm_sqr() * dx;
            r += t.powf(-2.0 * tau + 1.0) * gauss * source.norm_sqr() * dx;
        }
        let dt = 4.0 * (-4.0 * s).exp();
        left.push(l * dt);
        right.push(r * dt);
    }
    (
        trapezoid(g.step, left.into_iter()).sqrt(),
        trapezoid(g.step, right.into_iter()).sqrt(),
    )
}

/// Checks the heat-side estimate with constant `4/g₀` on every member.
/// The ratio is `left / right`; `u ≡ 0` gives `0`.
pub fn check_flat_carleman(basis: &HermiteBasis<f64>, tau: f64, gap: f64, ensemble: &SeriesEnsemble) -> Result<RatioReport> {
    let start = Instant::now();
    let dim = basis.dim();
    let shift = 4.0 * tau;
    let actual = ExcludedSet::Spectrum.distance(dim, shift);
    if !(gap > 0.0) || actual < gap * (1.0 - 1e-12) {
        return Err(Error::NearSpectrum { distance: actual, floor: gap });
    }
    let (first, _) = ensemble.first().ok_or_else(|| Error::Domain("empty ensemble".into()))?;
    let g = first.grid;
    let s_max = g.point(g.len - 1).abs().max(g.start.abs());
    if (8.0 * tau + 4.0 + 2.0 * dim as f64) * s_max > EXPONENT_CAP {
        return Err(Error::Support(format!(
            "time grid reaches s = {s_max}, too close to t = 0 for the weight at tau = {tau}"
        )));
    }
    for (w, _) in ensemble {
        if w.grid != g || w.frames[0].norm() != 0.0 || w.frames[g.len - 1].norm() != 0.0 {
            return Err(Error::Support("members must share the grid and vanish at both ends".into()));
        }
    }
    let rows: Vec<(f64, f64)> = ensemble
        .par_iter()
        .map(|(w, dw)| {
            let (left, right) = heat_norms(basis, tau, w, dw);
            let ratio = if left == 0.0 { 0.0 } else { left / right };
            // the same ratio read on the Hermite side
            let mass = w.norm();
            let image = w.apply_heat(dw, shift).norm();
            let hermite = if mass == 0.0 { 0.0 } else { 4.0 * mass / image };
            let mismatch = if ratio == 0.0 { (hermite - ratio).abs() } else { (hermite - ratio).abs() / ratio };
            (ratio, mismatch)
        })
        .collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mismatch = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let report = RatioReport::new(
        format!("flat(n={dim},4tau={shift})"),
        BoundKind::AtMost,
        4.0 / gap,
        1e-6,
        &ratios,
    )
    .require("transport", mismatch <= 1e-8)
    .record("transport_mismatch", mismatch)
    .record("declared_gap", gap)
    .record("stated_constant", 1.0 / (4.0 * gap));
    Ok(report.timed(start))
}
