//! Heat-to-Hermite change of variables.
//!
//! `t = e^{-4s}`, `y = x / (2√t)`, and `v = e^{-ns} e^{-|y|²/2} u`. Under this
//! map `4t(∂_t + Δ)` conjugates to `-(∂_s + H)`, so `(∂_t + Δ)u = f` becomes
//! `(∂_s + H)v = g` with `g = -4 e^{-(n+4)s} e^{-|y|²/2} f`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::hermite::{HermiteBasis, SpectralVector, TimeGrid};
use crate::scalar::compensated_sum;

/// Heat coordinates `(t, x)` of the Hermite point `(s, y)`.
pub fn heat_point(s: f64, y: &[f64]) -> (f64, Vec<f64>) {
    let t = (-4.0 * s).exp();
    let scale = 2.0 * (-2.0 * s).exp();
    (t, y.iter().map(|v| scale * v).collect())
}

/// Hermite coordinates `(s, y)` of the heat point `(t, x)`, `t > 0`.
pub fn hermite_point(t: f64, x: &[f64]) -> (f64, Vec<f64>) {
    let s = -t.ln() / 4.0;
    let scale = 0.5 / t.sqrt();
    (s, x.iter().map(|v| scale * v).collect())
}

/// The multiplier `e^{-ns} e^{-|y|²/2}` taking `u` to `v`.
pub fn conjugation_factor(s: f64, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let y2: f64 = y.iter().map(|v| v * v).sum();
    (-n * s - 0.5 * y2).exp()
}

/// Tensor grid of `s` values times a list of `y` points.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteGrid {
    pub dim: usize,
    pub s: Vec<f64>,
    pub y: Vec<Vec<f64>>,
}

impl HermiteGrid {
    /// `s` values times the tensor quadrature nodes of `basis`.
    pub fn from_basis(basis: &HermiteBasis<f64>, s: Vec<f64>) -> Self {
        let dim = basis.dim();
        let y = (0..basis.node_count()).map(|q| basis.node(q)[..dim].to_vec()).collect();
        Self { dim, s, y }
    }

    pub fn len(&self) -> usize {
        self.s.len() * self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flattened `(s, y)` pairs, `s` slowest.
    pub fn points(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.s.iter().flat_map(move |&s| self.y.iter().map(move |y| (s, y.as_slice())))
    }
}

/// Samples `v(s, y)` on a [`HermiteGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteSample {
    pub grid: HermiteGrid,
    pub values: Vec<f64>,
}

/// Samples `u(t, x)` at heat-side points.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatSample {
    pub dim: usize,
    pub points: Vec<(f64, Vec<f64>)>,
    pub values: Vec<f64>,
}

impl HeatSample {
    /// Samples `u` at the image of `grid`.
    pub fn on_image(grid: &HermiteGrid, u: impl Fn(f64, &[f64]) -> f64) -> Self {
        let points: Vec<(f64, Vec<f64>)> = grid.points().map(|(s, y)| heat_point(s, y)).collect();
        let values = points.iter().map(|(t, x)| u(*t, x)).collect();
        Self {
            dim: grid.dim,
            points,
            values,
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// `v = e^{-ns} e^{-|y|²/2} u`, checking that `u` was sampled on the image of `grid`.
pub fn to_hermite(grid: &HermiteGrid, u: &HeatSample) -> Result<HermiteSample> {
    if u.dim != grid.dim || u.points.len() != grid.len() || u.values.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "heat sample with {} points in dimension {} for a grid of {} points in dimension {}",
            u.points.len(),
            u.dim,
            grid.len(),
            grid.dim
        )));
    }
    let mut values = Vec::with_capacity(grid.len());
    for (((s, y), (t, x)), val) in grid.points().zip(&u.points).zip(&u.values) {
        let (te, xe) = heat_point(s, y);
        if t.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
            || !close(te, *t)
            || xe.iter().zip(x).any(|(a, b)| !close(*a, *b))
        {
            return Err(Error::GridMismatch(format!(
                "heat point (t = {t}, x = {x:?}) is not the image of (s = {s}, y = {y:?})"
            )));
        }
        values.push(conjugation_factor(s, y) * val);
    }
    Ok(HermiteSample {
        grid: grid.clone(),
        values,
    })
}

/// Inverse of [`to_hermite`].
pub fn from_hermite(v: &HermiteSample) -> HeatSample {
    let points: Vec<(f64, Vec<f64>)> = v.grid.points().map(|(s, y)| heat_point(s, y)).collect();
    let values = v
        .grid
        .points()
        .zip(&v.values)
        .map(|((s, y), val)| val / conjugation_factor(s, y))
        .collect();
    HeatSample {
        dim: v.grid.dim,
        points,
        values,
    }
}

/// Source term `g = -4 e^{-(n+4)s} e^{-|y|²/2} f` on `grid`.
pub fn source_to_hermite(grid: &HermiteGrid, f: impl Fn(f64, &[f64]) -> f64) -> HermiteSample {
    let values = grid
        .points()
        .map(|(s, y)| {
            let (t, x) = heat_point(s, y);
            -4.0 * (-4.0 * s).exp() * conjugation_factor(s, y) * f(t, &x)
        })
        .collect();
    HermiteSample {
        grid: grid.clone(),
        values,
    }
}

/// Residual of `(∂_s + H)v = g` for `v` built from `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugationReport {
    /// `‖(∂_s + H)v − g‖` over the interior `s` points.
    pub residual: f64,
    /// `‖g‖`, or `‖v‖` when `g` vanishes.
    pub reference: f64,
    pub relative: f64,
}

/// Evaluates the conjugation identity with `H` applied spectrally on the
/// quadrature nodes of `basis` and `∂_s` by fourth-order central differences.
pub fn conjugation_residual(
    basis: &HermiteBasis<f64>,
    grid: TimeGrid<f64>,
    u: impl Fn(f64, &[f64]) -> f64,
    f: impl Fn(f64, &[f64]) -> f64,
) -> Result<ConjugationReport> {
    if grid.len < 5 {
        return Err(Error::GridMismatch("fourth-order differences need at least 5 time points".into()));
    }
    let s: Vec<f64> = grid.points().collect();
    let hgrid = HermiteGrid::from_basis(basis, s);
    let heat = HeatSample::on_image(&hgrid, &u);
    let v = to_hermite(&hgrid, &heat)?;
    let g = source_to_hermite(&hgrid, &f);
    let ny = hgrid.y.len();
    let weights: Vec<f64> = (0..ny).map(|q| basis.node_weight(q)).collect();
    let frame = |k: usize| &v.values[k * ny..(k + 1) * ny];
    let h = grid.step;
    let mut res_terms = Vec::new();
    let mut g_terms = Vec::new();
    let mut v_terms = Vec::new();
    for k in 2..grid.len - 2 {
        let nodal: Vec<Complex<f64>> = frame(k).iter().map(|x| Complex::new(*x, 0.0)).collect();
        let hv = SpectralVector::from_nodal(basis, &nodal)?.apply_h().to_nodal(basis);
        for q in 0..ny {
            let ds = (-frame(k + 2)[q] + 8.0 * frame(k + 1)[q] - 8.0 * frame(k - 1)[q] + frame(k - 2)[q]) / (12.0 * h);
            let gk = g.values[k * ny + q];
            let r = ds + hv[q].re - gk;
            res_terms.push(weights[q] * r * r);
            g_terms.push(weights[q] * gk * gk);
            v_terms.push(weights[q] * frame(k)[q] * frame(k)[q]);
        }
    }
    let residual = (compensated_sum(res_terms) * h).sqrt();
    let g_norm = (compensated_sum(g_terms) * h).sqrt();
    let reference = if g_norm > 0.0 {
        g_norm
    } else {
        (compensated_sum(v_terms) * h).sqrt()
    };
    let relative = if reference > 0.0 { residual / reference } else { residual };
    Ok(ConjugationReport {
        residual,
        reference,
        relative,
    })
}

/// Observed convergence order from residuals at steps `h` and `h / ratio`.
pub fn observed_order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse / fine).ln() / ratio.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_grid() -> HermiteGrid {
        HermiteGrid {
            dim: 2,
            s: vec![-0.2, 0.0, 0.35],
            y: vec![vec![0.0, 0.0], vec![1.0, -0.5], vec![-2.0, 3.0]],
        }
    }

    #[test]
    fn coordinate_maps_are_inverse() {
        let (t, x) = heat_point(0.0, &[1.5]);
        assert_eq!(t, 1.0);
        assert_eq!(x, vec![3.0]);
        let (s, y) = hermite_point(0.3, &[0.2, -1.0]);
        let (t2, x2) = heat_point(s, &y);
        assert_relative_eq!(t2, 0.3, max_relative = 1e-15);
        assert_relative_eq!(x2[1], -1.0, max_relative = 1e-15);
    }

    #[test]
    fn gaussian_weight_matches_heat_side() {
        // e^{-|y|²/2} = e^{-|x|²/(8t)} and e^{-ns} = t^{n/4}
        let (t, x) = heat_point(0.4, &[0.7, -0.2]);
        let x2: f64 = x.iter().map(|v| v * v).sum();
        assert_relative_eq!(
            conjugation_factor(0.4, &[0.7, -0.2]),
            t.powf(0.5) * (-x2 / (8.0 * t)).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn envelope_function_maps_to_constant() {
        let grid = small_grid();
        let u = HeatSample::on_image(&grid, |t, x| {
            let x2: f64 = x.iter().map(|v| v * v).sum();
            t.powf(-0.5) * (x2 / (8.0 * t)).exp()
        });
        let v = to_hermite(&grid, &u).unwrap();
        for val in &v.values {
            assert_relative_eq!(*val, 1.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn round_trip_is_exact_to_rounding() {
        let grid = small_grid();
        let u = HeatSample::on_image(&grid, |t, x| (t * 3.0).sin() + x[0] * x[1] - 0.25);
        let back = from_hermite(&to_hermite(&grid, &u).unwrap());
        for (a, b) in back.values.iter().zip(&u.values) {
            assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
        }
    }

    #[test]
    fn mismatched_points_are_rejected() {
        let grid = small_grid();
        let mut u = HeatSample::on_image(&grid, |_, _| 1.0);
        u.points[4].1[0] += 1e-6;
        assert!(matches!(to_hermite(&grid, &u), Err(Error::GridMismatch(_))));
        let short = HeatSample {
            dim: 2,
            points: vec![],
            values: vec![],
        };
        assert!(to_hermite(&grid, &short).is_err());
    }

    #[test]
    fn zero_data_has_zero_residual() {
        let basis = HermiteBasis::<f64>::new(1, 9).unwrap();
        let grid = TimeGrid::new(0.0, 0.2, 11).unwrap();
        let r = conjugation_residual(&basis, grid, |_, _| 0.0, |_, _| 0.0).unwrap();
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn caloric_polynomial_is_annihilated() {
        // (∂_t + ∂_xx)(t − x²/2) = 0
        let basis = HermiteBasis::<f64>::new(1, 15).unwrap();
        let grid = TimeGrid::new(0.0, 0.3, 301).unwrap();
        let r = conjugation_residual(&basis, grid, |t, x| t - x[0] * x[0] / 2.0, |_, _| 0.0).unwrap();
        assert!(r.relative < 1e-6, "{r:?}");
    }
}
