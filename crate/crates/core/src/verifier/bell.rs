//! Estimate for a convex temporal weight.
//!
//! With `v = e^{-h} w`, `e^{h}(∂_s + H)v = (∂_s + H − h')w`, whose norm is
//! that of `L_h w = (−∂_s − H + h')w`. Integrating the cross term by parts,
//! `‖L_h w‖² = ‖∂_s w‖² + ‖(H − h')w‖² + ‖(h'')^{1/2} w‖²`, and the gap
//! condition on `h` turns this into
//! `‖(1+h'')^{1/2} w‖² + ‖min{1, (1+h'')^{1/2}/(1+h')} H w‖² ≤ C ‖L_h w‖²`.

use std::time::Instant;

use num_complex::Complex;
use rayon::prelude::*;

use super::gap::{expansion, trapezoid};
use super::report::{BoundKind, RatioReport};
use crate::error::{Error, Result};
use crate::hermite::SpectralSeries;
use crate::weights::{dist_to_naturals, WeightH};

pub const BELL_IDENTITY_TOL: f64 = 1e-6;
/// Constant of the conclusion from the worst split of `h'' + dist(h', ℕ) > ¼`.
pub const BELL_CONSTANT: f64 = 16.0;

/// `min (dist(h', ℕ)² + h'')` at `per_unit` samples per unit of `s`.
pub fn worst_split(h: &WeightH<f64>, per_unit: usize) -> f64 {
    let (a, b) = h.domain();
    let n = ((b - a) * per_unit as f64).round().max(1.0) as usize;
    (0..=n)
        .map(|k| {
            let [_, d1, d2, _] = h.eval(a + (b - a) * k as f64 / n as f64);
            dist_to_naturals(d1).powi(2) + d2
        })
        .fold(f64::INFINITY, f64::min)
}

/// Checks the expansion identity and records `C` for every member; the
/// ensemble's time grid must lie in the domain of `h`.
pub fn check_bell(h: &WeightH<f64>, ensemble: &[(SpectralSeries<f64>, SpectralSeries<f64>)]) -> Result<RatioReport> {
    let start = Instant::now();
    let first = ensemble.first().ok_or_else(|| Error::Domain("empty ensemble".into()))?;
    let grid = first.0.grid;
    let (lo, hi) = h.domain();
    let end = grid.point(grid.len - 1);
    if grid.start < lo - 1e-12 || end > hi + 1e-12 {
        return Err(Error::Domain(format!(
            "time grid [{}, {end}] leaves the weight's domain [{lo}, {hi}]",
            grid.start
        )));
    }
    let jets: Vec<[f64; 4]> = grid.points().map(|s| h.eval(s)).collect();
    let slope = |s: f64| h.eval(s)[1];
    let rows: Vec<(f64, f64, f64)> = ensemble
        .par_iter()
        .map(|(w, dw)| {
            let e = expansion(w, dw, slope);
            let curvature = trapezoid(grid.step, w.frames.iter().zip(&jets).map(|(f, j)| j[2] * f.norm_sqr()));
            let residual = (e.total - e.derivative - e.shifted - curvature).abs() / e.total;
            // the same expansion against (∂_s − H + h') read literally
            let literal = trapezoid(
                grid.step,
                w.frames.iter().zip(&dw.frames).zip(&jets).map(|((f, df), j)| {
                    let a = f.apply_shifted(Complex::new(j[1], 0.0));
                    df.axpy(Complex::new(-1.0, 0.0), &a).norm_sqr()
                }),
            );
            let literal_residual = (literal - e.derivative - e.shifted - curvature).abs() / literal;
            let lhs = trapezoid(
                grid.step,
                w.frames.iter().zip(&jets).map(|(f, j)| {
                    let m = (1.0f64).min((1.0 + j[2]).sqrt() / (1.0 + j[1]));
                    (1.0 + j[2]) * f.norm_sqr() + m * m * f.apply_h().norm_sqr()
                }),
            );
            (lhs / e.total, residual, literal_residual)
        })
        .collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let identity = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let literal = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let split = worst_split(h, 1000);
    let report = RatioReport::new(format!("bell(tau={:.6})", h.tau()), BoundKind::AtMost, BELL_CONSTANT, 0.0, &ratios)
        .require("identity", identity < BELL_IDENTITY_TOL)
        .require("split", split >= 1.0 / 16.0)
        .record("identity_residual", identity)
        .record("literal_sign_residual", literal)
        .record("worst_split", split);
    Ok(report.timed(start))
}
