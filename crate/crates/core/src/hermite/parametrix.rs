//! Mode-wise exponential convolution inverting `∂_s + H − τ`.
//!
//! Each eigen-coefficient obeys `w' + (λ − τ) w = f`. Modes above `τ`
//! integrate forward from the left end of the grid, modes below `τ`
//! backward from the right end, so the result is the unique solution that
//! stays bounded in both directions. The forcing is taken piecewise linear
//! between grid points and integrated exactly against the exponential.

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;

use super::basis::HermiteBasis;
use super::spectral::{spectrum_distance, SpectralVector};
use crate::error::{Error, Result};
use crate::smooth::bump_inf;
use crate::Scalar;

/// Closest admissible approach of `τ` to an eigenvalue.
pub const PARAMETRIX_FLOOR: f64 = 1e-3;

/// Uniform grid `s_k = start + k·step`, `k < len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    pub start: T,
    pub step: T,
    pub len: usize,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(start: T, end: T, len: usize) -> Result<Self> {
        if len < 2 || !(end > start) {
            return Err(Error::GridMismatch(format!(
                "time grid needs len >= 2 and end > start, got {len} points on [{start}, {end}]"
            )));
        }
        Ok(Self {
            start,
            step: (end - start) / T::from_usize_lossy(len - 1),
            len,
        })
    }

    pub fn point(&self, k: usize) -> T {
        self.start + self.step * T::from_usize_lossy(k)
    }

    pub fn points(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.len).map(|k| self.point(k))
    }
}

/// Spectral vectors sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSeries<T> {
    pub grid: TimeGrid<T>,
    pub frames: Vec<SpectralVector<T>>,
}

impl<T: Scalar> SpectralSeries<T> {
    pub fn new(grid: TimeGrid<T>, frames: Vec<SpectralVector<T>>) -> Result<Self> {
        if frames.len() != grid.len {
            return Err(Error::GridMismatch(format!(
                "{} frames for {} time points",
                frames.len(),
                grid.len
            )));
        }
        Ok(Self { grid, frames })
    }

    pub fn dim(&self) -> usize {
        self.frames[0].dim()
    }

    /// `(∂_s + H − τ) w` given the samples of `w` (self) and of `∂_s w`.
    pub fn apply_heat(&self, derivative: &Self, tau: T) -> Self {
        let frames = self
            .frames
            .iter()
            .zip(&derivative.frames)
            .map(|(w, dw)| dw.axpy(Complex::new(T::one(), T::zero()), &w.apply_shifted(Complex::new(tau, T::zero()))))
            .collect();
        Self { grid: self.grid, frames }
    }

    /// Discrete `L²(ds)` norm by the trapezoid rule in `s`.
    pub fn norm(&self) -> T {
        let n = self.frames.len();
        let total = crate::scalar::compensated_sum(self.frames.iter().enumerate().map(|(k, f)| {
            let w = if k == 0 || k + 1 == n { T::c(0.5) } else { T::one() };
            w * f.norm_sqr()
        }));
        (total * self.grid.step).sqrt()
    }

    /// Frame-wise difference `self − other`.
    pub fn difference(&self, other: &Self) -> Self {
        let frames = self
            .frames
            .iter()
            .zip(&other.frames)
            .map(|(a, b)| a.axpy(Complex::new(-T::one(), T::zero()), b))
            .collect();
        Self { grid: self.grid, frames }
    }
}

/// Random band-limited series and its exact `s`-derivative: every mode up
/// to eigenvalue `band` carries a random complex amplitude times a C^∞ bump
/// whose support is a random subinterval of the grid's middle three fifths.
pub fn random_smooth_series<T: Scalar>(
    basis: &HermiteBasis<T>,
    grid: TimeGrid<T>,
    band: usize,
    rng: &mut impl Rng,
) -> (SpectralSeries<T>, SpectralSeries<T>) {
    let span = grid.point(grid.len - 1) - grid.start;
    let template = SpectralVector::zeros(basis);
    let mut w = vec![template.clone(); grid.len];
    let mut dw = vec![template; grid.len];
    for (b, block) in basis.blocks().iter().enumerate() {
        if basis.dim() + 2 * b > band {
            continue;
        }
        for m in 0..block.len() {
            let amp = Complex::new(T::c(rng.gen_range(-1.0..1.0)), T::c(rng.gen_range(-1.0..1.0)));
            let a: f64 = rng.gen_range(0.2..0.45);
            let b_: f64 = rng.gen_range(0.55..0.8);
            let lo = grid.start + span * T::c(a);
            let hi = grid.start + span * T::c(b_);
            for k in 0..grid.len {
                let bump = bump_inf(grid.point(k), lo, hi);
                w[k].blocks_mut()[b][m] = amp * bump[0];
                dw[k].blocks_mut()[b][m] = amp * bump[1];
            }
        }
    }
    (SpectralSeries { grid, frames: w }, SpectralSeries { grid, frames: dw })
}

// (1 − e^{-x})/x and (x − 1 + e^{-x})/x² for x ≥ 0
fn phi_pair<T: Scalar>(x: T) -> (T, T) {
    if x < T::c(1e-2) {
        let x2 = x * x;
        let p0 = T::one() - x / T::c(2.0) + x2 / T::c(6.0) - x2 * x / T::c(24.0) + x2 * x2 / T::c(120.0);
        let p1 = T::c(0.5) - x / T::c(6.0) + x2 / T::c(24.0) - x2 * x / T::c(120.0) + x2 * x2 / T::c(720.0);
        (p0, p1)
    } else {
        let em = (-x).exp_m1();
        (-em / x, (x + em) / (x * x))
    }
}

/// Solves `w' + rate·w = f` on a uniform grid with piecewise-linear `f`.
///
/// Positive rates integrate forward from `w = 0` at the first point,
/// negative rates backward from `w = 0` at the last.
pub fn mode_convolve<T: Scalar>(rate: T, step: T, f: &[Complex<T>]) -> Vec<Complex<T>> {
    let n = f.len();
    let mut w = vec![Complex::new(T::zero(), T::zero()); n];
    if n == 0 {
        return w;
    }
    let x = rate.abs() * step;
    let decay = (-x).exp();
    let (p0, p1) = phi_pair(x);
    let near = step * (p0 - p1);
    let far = step * p1;
    if rate > T::zero() {
        for k in 0..n - 1 {
            w[k + 1] = w[k] * decay + f[k] * near + f[k + 1] * far;
        }
    } else {
        for k in (0..n - 1).rev() {
            w[k] = w[k + 1] * decay - (f[k] * far + f[k + 1] * near);
        }
    }
    w
}

/// Applies the parametrix `K` of `∂_s + H − τ` to a compactly supported series.
pub fn parametrix_apply<T: Scalar>(f: &SpectralSeries<T>, tau: T) -> Result<SpectralSeries<T>> {
    let dim = f.dim();
    let distance = spectrum_distance(dim, Complex::new(tau, T::zero()));
    if distance < T::c(PARAMETRIX_FLOOR) {
        return Err(Error::NearSpectrum {
            distance: distance.to_f64_lossy(),
            floor: PARAMETRIX_FLOOR,
        });
    }
    let last = f.frames.len() - 1;
    if f.frames[0].norm() != T::zero() || f.frames[last].norm() != T::zero() {
        return Err(Error::Support("forcing must vanish at both ends of the time grid".into()));
    }
    let template = &f.frames[0];
    let shape: Vec<(usize, usize)> = template
        .blocks()
        .iter()
        .enumerate()
        .flat_map(|(b, block)| (0..block.len()).map(move |m| (b, m)))
        .collect();
    let columns: Vec<Vec<Complex<T>>> = shape
        .par_iter()
        .map(|&(b, m)| {
            let series: Vec<Complex<T>> = f.frames.iter().map(|fr| fr.blocks()[b][m]).collect();
            mode_convolve(template.eigenvalue(b) - tau, f.grid.step, &series)
        })
        .collect();
    let mut frames = vec![template.map_blocks(|_, _| Complex::new(T::zero(), T::zero())); f.frames.len()];
    for (&(b, m), col) in shape.iter().zip(&columns) {
        for (frame, v) in frames.iter_mut().zip(col) {
            frame.blocks_mut()[b][m] = *v;
        }
    }
    SpectralSeries::new(f.grid, frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ones(n: usize) -> Vec<Complex<f64>> {
        vec![Complex::new(1.0, 0.0); n]
    }

    #[test]
    fn unit_forcing_forward_matches_antiderivative() {
        // w' + a w = 1 on [0, 1], w(0) = 0
        let a = 7.5;
        let n = 101;
        let w = mode_convolve(a, 0.01, &ones(n));
        for (k, v) in w.iter().enumerate() {
            let s = k as f64 * 0.01;
            assert_relative_eq!(v.re, (1.0 - (-a * s).exp()) / a, epsilon = 1e-15, max_relative = 1e-13);
        }
    }

    #[test]
    fn unit_forcing_backward_matches_antiderivative() {
        // w' − b w = 1 on [0, 1], w(1) = 0
        let b = 2.25;
        let n = 51;
        let w = mode_convolve(-b, 0.02, &ones(n));
        for (k, v) in w.iter().enumerate() {
            let s = k as f64 * 0.02;
            assert_relative_eq!(v.re, -(1.0 - (-b * (1.0 - s)).exp()) / b, epsilon = 1e-15, max_relative = 1e-13);
        }
    }

    #[test]
    fn small_rates_use_the_series_branch() {
        let w = mode_convolve(1e-9, 0.1, &ones(11));
        assert_relative_eq!(w[10].re, 1.0, max_relative = 1e-8);
    }

    #[test]
    fn zero_forcing_and_preconditions() {
        let basis = HermiteBasis::<f64>::new(1, 9).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 11).unwrap();
        let zero = SpectralSeries::new(grid, vec![SpectralVector::zeros(&basis); 11]).unwrap();
        let out = parametrix_apply(&zero, 2.0).unwrap();
        assert_eq!(out.norm(), 0.0);
        assert!(matches!(parametrix_apply(&zero, 3.0005), Err(Error::NearSpectrum { .. })));
        let mut dirty = zero.clone();
        dirty.frames[0].blocks_mut()[0][0] = Complex::new(1.0, 0.0);
        assert!(matches!(parametrix_apply(&dirty, 2.0), Err(Error::Support(_))));
        assert!(SpectralSeries::new(grid, vec![]).is_err());
    }

    #[test]
    fn inverts_the_heat_operator_on_smooth_data() {
        let basis = HermiteBasis::<f64>::new(1, 21).unwrap();
        let grid = TimeGrid::new(-3.0, 3.0, 12001).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for tau in [4.0, 12.5] {
            let (w, dw) = random_smooth_series(&basis, grid, 21, &mut rng);
            let f = w.apply_heat(&dw, tau);
            let back = parametrix_apply(&f, tau).unwrap();
            let err = back.difference(&w).norm() / w.norm();
            assert!(err < 1e-6, "tau {tau}: relative error {err:e}");
        }
    }
}
