//! Functions sampled on `(s, y)` tensor grids: trapezoid in `s`, the
//! Gauss–Hermite nodes of a basis in `y`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::hermite::{HermiteBasis, SpectralSeries, TimeGrid};
use crate::scalar::compensated_sum;

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: TimeGrid<f64>,
    /// Quadrature weights of the `y` nodes.
    weights: Vec<f64>,
    /// Frame-major values, `values[k * nodes + q]`.
    values: Vec<Complex<f64>>,
    norm: f64,
}

impl GridFunction {
    fn assemble(grid: TimeGrid<f64>, weights: Vec<f64>, values: Vec<Complex<f64>>) -> Self {
        let ny = weights.len();
        let n = grid.len;
        let terms = values.iter().enumerate().map(|(p, v)| {
            let k = p / ny;
            let trap = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
            trap * weights[p % ny] * v.norm_sqr()
        });
        let norm = (compensated_sum(terms) * grid.step).sqrt();
        Self { grid, weights, values, norm }
    }

    pub fn from_fn(basis: &HermiteBasis<f64>, grid: TimeGrid<f64>, f: impl Fn(f64, &[f64]) -> Complex<f64>) -> Self {
        let dim = basis.dim();
        let ny = basis.node_count();
        let weights = (0..ny).map(|q| basis.node_weight(q)).collect();
        let mut values = Vec::with_capacity(grid.len * ny);
        for s in grid.points() {
            for q in 0..ny {
                values.push(f(s, &basis.node(q)[..dim]));
            }
        }
        Self::assemble(grid, weights, values)
    }

    /// Nodal values of a coefficient series.
    pub fn from_series(basis: &HermiteBasis<f64>, series: &SpectralSeries<f64>) -> Result<Self> {
        if series.dim() != basis.dim() {
            return Err(Error::GridMismatch(format!(
                "series in dimension {} against a basis in dimension {}",
                series.dim(),
                basis.dim()
            )));
        }
        let weights = (0..basis.node_count()).map(|q| basis.node_weight(q)).collect();
        let values = series.frames.iter().flat_map(|f| f.to_nodal(basis)).collect();
        Ok(Self::assemble(series.grid, weights, values))
    }

    pub fn nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn frame(&self, k: usize) -> &[Complex<f64>] {
        let ny = self.nodes();
        &self.values[k * ny..(k + 1) * ny]
    }

    /// `L²(ds dy)` norm, computed once at construction.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// `⟨self, other⟩` with the same quadrature.
    pub fn inner(&self, other: &Self) -> Result<Complex<f64>> {
        if self.grid != other.grid || self.weights != other.weights {
            return Err(Error::GridMismatch("inner product of functions on different grids".into()));
        }
        let ny = self.nodes();
        let n = self.grid.len;
        let mut re = Vec::with_capacity(self.values.len());
        let mut im = Vec::with_capacity(self.values.len());
        for (p, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            let k = p / ny;
            let trap = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
            let z = a.conj() * b * (trap * self.weights[p % ny]);
            re.push(z.re);
            im.push(z.im);
        }
        Ok(Complex::new(compensated_sum(re), compensated_sum(im)) * self.grid.step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::random_smooth_series;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parseval_against_coefficients() {
        for dim in [1, 2] {
            let basis = HermiteBasis::new(dim, 15).unwrap();
            let grid = TimeGrid::new(-1.0, 1.0, 201).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let (w, _) = random_smooth_series(&basis, grid, 15, &mut rng);
            let g = GridFunction::from_series(&basis, &w).unwrap();
            assert!((g.norm() - w.norm()).abs() <= 1e-8 * w.norm(), "dim {dim}");
            assert!((g.inner(&g).unwrap().re - g.norm().powi(2)).abs() < 1e-12 * g.norm().powi(2));
        }
    }

    #[test]
    fn separable_gaussian_norm() {
        // ∫∫ e^{-s²} e^{-y²} = π on a wide grid
        let basis = HermiteBasis::new(1, 41).unwrap();
        let grid = TimeGrid::new(-8.0, 8.0, 1601).unwrap();
        let g = GridFunction::from_fn(&basis, grid, |s, y| Complex::new((-(s * s + y[0] * y[0]) / 2.0).exp(), 0.0));
        assert!((g.norm() * g.norm() - std::f64::consts::PI).abs() < 1e-10);
    }
}
