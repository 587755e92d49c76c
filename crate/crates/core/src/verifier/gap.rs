//! Flat Carleman estimate with a spectral gap:
//! `g₀‖w‖ ≤ ‖(−∂_s − H + 4τ) w‖` when `4τ` keeps distance `g₀` from the spectrum.

use std::time::Instant;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::report::{BoundKind, RatioReport};
use crate::error::{Error, Result};
use crate::hermite::{random_smooth_series, spectrum_distance, HermiteBasis, SpectralSeries, TimeGrid};

/// Sets that `4τ` may have to avoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExcludedSet {
    /// The spectrum `n + 2ℕ` of `H`.
    Spectrum,
    /// `n + ℕ`.
    ShiftedIntegers,
    /// `(2n + ℕ)/4`.
    Quarters,
}

impl ExcludedSet {
    pub const ALL: [ExcludedSet; 3] = [ExcludedSet::Spectrum, ExcludedSet::ShiftedIntegers, ExcludedSet::Quarters];

    pub fn as_str(self) -> &'static str {
        match self {
            ExcludedSet::Spectrum => "spectrum",
            ExcludedSet::ShiftedIntegers => "shifted_integers",
            ExcludedSet::Quarters => "quarters",
        }
    }

    /// Distance from `x` to the set in dimension `dim`.
    pub fn distance(self, dim: usize, x: f64) -> f64 {
        let n = dim as f64;
        match self {
            ExcludedSet::Spectrum => spectrum_distance(dim, Complex::new(x, 0.0)),
            ExcludedSet::ShiftedIntegers => {
                let k = (x - n).round().max(0.0);
                (x - n - k).abs()
            }
            ExcludedSet::Quarters => {
                let k = (4.0 * x - 2.0 * n).round().max(0.0);
                (x - (2.0 * n + k) / 4.0).abs()
            }
        }
    }
}

/// `(w, ∂_s w)` pairs.
pub type SeriesEnsemble = Vec<(SpectralSeries<f64>, SpectralSeries<f64>)>;

/// Seeded ensemble of band-limited series with smooth compact `s`-support;
/// member `k` draws from its own stream `seed + k`, so the result does not
/// depend on scheduling.
pub fn series_ensemble(basis: &HermiteBasis<f64>, grid: TimeGrid<f64>, band: usize, size: usize, seed: u64) -> SeriesEnsemble {
    (0..size)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            random_smooth_series(basis, grid, band, &mut rng)
        })
        .collect()
}

/// Norms entering the expansion of `‖(−∂_s − A)w‖²` for a frame-wise
/// self-adjoint `A = H − m(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Expansion {
    pub total: f64,
    pub derivative: f64,
    pub shifted: f64,
    pub mass: f64,
}

/// Trapezoid in `s` of frame-wise quantities.
pub(crate) fn trapezoid(step: f64, values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    let terms = values.enumerate().map(|(k, v)| if k == 0 || k + 1 == n { 0.5 * v } else { v });
    crate::scalar::compensated_sum(terms) * step
}

/// `‖(−∂_s − H + m(s))w‖²`, `‖∂_s w‖²`, `‖(H − m)w‖²` and `‖w‖²`.
pub(crate) fn expansion(w: &SpectralSeries<f64>, dw: &SpectralSeries<f64>, shift: impl Fn(f64) -> f64) -> Expansion {
    let g = w.grid;
    let mut total = Vec::with_capacity(g.len);
    let mut derivative = Vec::with_capacity(g.len);
    let mut shifted = Vec::with_capacity(g.len);
    let mut mass = Vec::with_capacity(g.len);
    for (k, (f, df)) in w.frames.iter().zip(&dw.frames).enumerate() {
        let m = shift(g.point(k));
        let a = f.apply_shifted(Complex::new(m, 0.0));
        let l = df.axpy(Complex::new(1.0, 0.0), &a);
        total.push(l.norm_sqr());
        derivative.push(df.norm_sqr());
        shifted.push(a.norm_sqr());
        mass.push(f.norm_sqr());
    }
    Expansion {
        total: trapezoid(g.step, total.into_iter()),
        derivative: trapezoid(g.step, derivative.into_iter()),
        shifted: trapezoid(g.step, shifted.into_iter()),
        mass: trapezoid(g.step, mass.into_iter()),
    }
}

/// Identity tolerance of the commuting expansion.
pub const GAP_IDENTITY_TOL: f64 = 1e-8;
/// Tolerance on the gap bound itself.
pub const GAP_BOUND_TOL: f64 = 1e-6;

/// Checks `‖(−∂_s − H + 4τ)w‖² = ‖∂_s w‖² + ‖(H − 4τ)w‖²` and
/// `‖(−∂_s − H + 4τ)w‖ ≥ g₀‖w‖` on every member. The recorded ratio is
/// `‖(−∂_s − H + 4τ)w‖ / (g₀‖w‖)`, bounded below by 1.
pub fn check_gap_inequality(tau: f64, gap: f64, ensemble: &[(SpectralSeries<f64>, SpectralSeries<f64>)]) -> Result<RatioReport> {
    let start = Instant::now();
    let dim = ensemble.first().map(|(w, _)| w.dim()).ok_or_else(|| Error::Domain("empty ensemble".into()))?;
    let shift = 4.0 * tau;
    let actual = ExcludedSet::Spectrum.distance(dim, shift);
    if !(gap > 0.0) || actual < gap * (1.0 - 1e-12) {
        return Err(Error::NearSpectrum { distance: actual, floor: gap });
    }
    let rows: Vec<(f64, f64)> = ensemble
        .par_iter()
        .map(|(w, dw)| {
            let e = expansion(w, dw, |_| shift);
            let residual = (e.total - e.derivative - e.shifted).abs() / e.total.max(f64::MIN_POSITIVE);
            let ratio = if e.mass > 0.0 { (e.total / e.mass).sqrt() / gap } else { f64::INFINITY };
            (ratio, residual)
        })
        .collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let identity = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut report = RatioReport::new(format!("gap(n={dim},4tau={shift})"), BoundKind::AtLeast, 1.0, GAP_BOUND_TOL, &ratios)
        .require("identity", identity <= GAP_IDENTITY_TOL)
        .record("identity_residual", identity)
        .record("declared_gap", gap);
    for set in ExcludedSet::ALL {
        report = report.record(format!("gap_{}", set.as_str()), set.distance(dim, shift));
    }
    Ok(report.timed(start))
}

/// `(w, ∂_s w)` for `w = e^{-(s/a)²} ψ_0`, the lowest mode with a Gaussian
/// profile of width `a`; `‖∂_s w‖ = ‖w‖ / a`.
pub fn ground_mode_probe(
    basis: &HermiteBasis<f64>,
    grid: TimeGrid<f64>,
    width: f64,
) -> (SpectralSeries<f64>, SpectralSeries<f64>) {
    let template = crate::hermite::SpectralVector::zeros(basis);
    let mut w = Vec::with_capacity(grid.len);
    let mut dw = Vec::with_capacity(grid.len);
    for s in grid.points() {
        let z = s / width;
        let g = (-z * z).exp();
        let mut a = template.clone();
        a.blocks_mut()[0][0] = Complex::new(g, 0.0);
        let mut b = template.clone();
        b.blocks_mut()[0][0] = Complex::new(-2.0 * z / width * g, 0.0);
        w.push(a);
        dw.push(b);
    }
    (SpectralSeries { grid, frames: w }, SpectralSeries { grid, frames: dw })
}

/// Smallest ratio `‖(−∂_s − H + 4τ)w‖ / ‖w‖` over the ensemble for each `τ`,
/// with the distance of `4τ` to the spectrum.
pub fn gap_sweep(taus: &[f64], ensemble: &[(SpectralSeries<f64>, SpectralSeries<f64>)]) -> Vec<(f64, f64, f64)> {
    let dim = ensemble.first().map(|(w, _)| w.dim()).unwrap_or(1);
    taus.iter()
        .map(|&tau| {
            let worst = ensemble
                .iter()
                .map(|(w, dw)| {
                    let e = expansion(w, dw, |_| 4.0 * tau);
                    (e.total / e.mass).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            (tau, ExcludedSet::Spectrum.distance(dim, 4.0 * tau), worst)
        })
        .collect()
}
