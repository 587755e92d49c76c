//! Hermite functions, Gauss–Hermite quadrature and the multi-index bookkeeping
//! of the tensor eigenbasis.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::compensated_sum;
use crate::Scalar;

/// Multi-index of a tensor Hermite function; unused trailing slots are zero.
pub type MultiIndex = [usize; 3];

/// Values `ψ_0(y), …, ψ_kmax(y)` of the L²-normalized Hermite functions.
///
/// The three-term recurrence runs on the polynomial part and is renormalized
/// whenever it grows large, so the Gaussian factor is applied once at the
/// end. Entries whose true magnitude lies below the smallest positive
/// normal of `T` come back as 0.
pub fn hermite_all<T: Scalar>(kmax: usize, y: T) -> Vec<T> {
    let big = T::max_value().sqrt();
    let mut out = vec![T::zero(); kmax + 1];
    let mut logs = vec![T::zero(); kmax + 1];
    let mut log_scale = -y * y / T::c(2.0);
    let mut prev = T::zero();
    let mut cur = T::PI().powf(T::c(-0.25));
    out[0] = cur;
    logs[0] = log_scale;
    for k in 0..kmax {
        let kf = T::from_usize_lossy(k);
        let next = (T::c(2.0) / (kf + T::one())).sqrt() * y * cur - (kf / (kf + T::one())).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > big {
            let s = cur.abs();
            cur /= s;
            prev /= s;
            log_scale += s.ln();
        }
        out[k + 1] = cur;
        logs[k + 1] = log_scale;
    }
    for (v, l) in out.iter_mut().zip(&logs) {
        *v = if *v == T::zero() {
            T::zero()
        } else {
            v.signum() * (v.abs().ln() + *l).exp()
        };
    }
    out
}

/// Single Hermite function value `ψ_k(y)`.
pub fn hermite_eval<T: Scalar>(k: usize, y: T) -> T {
    hermite_all(k, y)[k]
}

/// Values and first derivatives of `ψ_0, …, ψ_kmax` at `y`.
pub fn hermite_with_derivative<T: Scalar>(kmax: usize, y: T) -> (Vec<T>, Vec<T>) {
    let psi = hermite_all(kmax + 1, y);
    let half = T::c(0.5);
    let d = (0..=kmax)
        .map(|k| {
            let kf = T::from_usize_lossy(k);
            let down = if k == 0 { T::zero() } else { (kf * half).sqrt() * psi[k - 1] };
            down - ((kf + T::one()) * half).sqrt() * psi[k + 1]
        })
        .collect();
    let mut vals = psi;
    vals.truncate(kmax + 1);
    (vals, d)
}

/// Gauss–Hermite rule in function form: `∫ f ≈ Σ weights[q] f(nodes[q])`,
/// exact when `f e^{y²}` is a polynomial of degree `< 2·len`.
#[derive(Debug, Clone)]
pub struct GaussHermite<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> GaussHermite<T> {
    /// Rule with `order` nodes: eigenvalues of the Jacobi matrix, polished
    /// by Newton steps on the recurrence; computed in `f64` and converted.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let nf = order as f64;
        let half = order.div_ceil(2);
        let jacobi = DMatrix::<f64>::from_fn(order, order, |r, c| {
            if r.abs_diff(c) == 1 {
                (r.max(c) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let mut eig: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        let mut pos: Vec<(f64, f64)> = Vec::with_capacity(half);
        for &start in &eig[..half] {
            let mut z = start;
            for _ in 0..8 {
                let (pn, pn1) = top_pair(order, z);
                let dz = pn / ((2.0 * nf).sqrt() * pn1);
                z -= dz;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            let psi_prev = hermite_eval::<f64>(order - 1, z);
            pos.push((z, 1.0 / (nf * psi_prev * psi_prev)));
        }
        if order % 2 == 1 {
            // odd rules have the origin as their innermost node
            pos[half - 1].0 = 0.0;
        }
        let mirrored = if order % 2 == 1 { half - 1 } else { half };
        let mut all: Vec<(f64, f64)> = pos[..mirrored].iter().map(|&(z, w)| (-z, w)).collect();
        all.extend_from_slice(&pos);
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        debug_assert_eq!(all.len(), order);
        Self {
            nodes: all.iter().map(|p| T::c(p.0)).collect(),
            weights: all.iter().map(|p| T::c(p.1)).collect(),
        }
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

// ψ_N(z) and ψ_{N-1}(z) up to a common positive factor.
fn top_pair(order: usize, z: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..order {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * z * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        let s = cur.abs().max(prev.abs());
        if s > 1e150 {
            cur /= s;
            prev /= s;
        }
    }
    (cur, prev)
}

/// Multi-indices `α ∈ ℕ^dim` with `|α| = m`, first coordinate descending.
pub fn multi_indices(dim: usize, m: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    match dim {
        1 => out.push([m, 0, 0]),
        2 => (0..=m).rev().for_each(|a| out.push([a, m - a, 0])),
        3 => {
            for a in (0..=m).rev() {
                for b in (0..=m - a).rev() {
                    out.push([a, b, m - a - b]);
                }
            }
        }
        _ => {}
    }
    out
}

/// Truncated eigenbasis of `H = -Δ + |y|²` on `ℝ^dim` with a tensor
/// Gauss–Hermite rule.
///
/// Block `b` holds the multi-indices with `|α| = b`, eigenvalue `dim + 2b`.
#[derive(Debug, Clone)]
pub struct HermiteBasis<T> {
    dim: usize,
    lambda_max: usize,
    kmax: usize,
    quad: GaussHermite<T>,
    blocks: Vec<Vec<MultiIndex>>,
    // ψ_k at the 1D nodes, row k, for k ≤ kmax + 2
    table: Vec<Vec<T>>,
}

/// Extra Gauss–Hermite nodes beyond the exactness requirement.
const QUADRATURE_MARGIN: usize = 8;

impl<T: Scalar> HermiteBasis<T> {
    pub fn new(dim: usize, lambda_max: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Domain(format!("dimension {dim} not in 1..=3")));
        }
        if lambda_max < dim {
            return Err(Error::Domain(format!(
                "lambda_max {lambda_max} below the ground state {dim}"
            )));
        }
        let kmax = (lambda_max - dim) / 2;
        // products of two basis functions times |y|² have degree 2 kmax + 2
        let order = 2 * (kmax + 1) + QUADRATURE_MARGIN;
        let quad = GaussHermite::<T>::new(order);
        let blocks = (0..=kmax).map(|m| multi_indices(dim, m)).collect();
        let mut table = vec![vec![T::zero(); quad.len()]; kmax + 3];
        for (q, &y) in quad.nodes().iter().enumerate() {
            for (k, v) in hermite_all(kmax + 2, y).into_iter().enumerate() {
                table[k][q] = v;
            }
        }
        Ok(Self {
            dim,
            lambda_max,
            kmax,
            quad,
            blocks,
            table,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda_max(&self) -> usize {
        self.lambda_max
    }

    /// Largest total degree `|α|` kept.
    pub fn max_degree(&self) -> usize {
        self.kmax
    }

    pub fn quadrature(&self) -> &GaussHermite<T> {
        &self.quad
    }

    /// Retained eigenvalues `dim, dim + 2, …`.
    pub fn eigenvalues(&self) -> Vec<usize> {
        (0..self.blocks.len()).map(|b| self.dim + 2 * b).collect()
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<MultiIndex>] {
        &self.blocks
    }

    /// Block position of eigenvalue `lambda`.
    pub fn block_of(&self, lambda: i64) -> Result<usize> {
        let n = self.dim as i64;
        if lambda < n || (lambda - n) % 2 != 0 {
            return Err(Error::InvalidEigenvalue {
                lambda,
                reason: "not in the spectrum dim + 2N",
            });
        }
        if lambda > self.lambda_max as i64 {
            return Err(Error::InvalidEigenvalue {
                lambda,
                reason: "above lambda_max",
            });
        }
        Ok(((lambda - n) / 2) as usize)
    }

    pub fn block(&self, lambda: i64) -> Result<&[MultiIndex]> {
        Ok(&self.blocks[self.block_of(lambda)?])
    }

    /// Total number of basis functions.
    pub fn size(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// Number of tensor quadrature nodes.
    pub fn node_count(&self) -> usize {
        self.quad.len().pow(self.dim as u32)
    }

    /// 1D node positions of tensor node `q` (slowest coordinate first).
    pub fn node_digits(&self, q: usize) -> [usize; 3] {
        let m = self.quad.len();
        let mut digits = [0; 3];
        let mut rest = q;
        for d in (0..self.dim).rev() {
            digits[d] = rest % m;
            rest /= m;
        }
        digits
    }

    pub fn node(&self, q: usize) -> [T; 3] {
        let digits = self.node_digits(q);
        let mut y = [T::zero(); 3];
        for d in 0..self.dim {
            y[d] = self.quad.nodes()[digits[d]];
        }
        y
    }

    pub fn node_weight(&self, q: usize) -> T {
        let digits = self.node_digits(q);
        (0..self.dim).fold(T::one(), |acc, d| acc * self.quad.weights()[digits[d]])
    }

    /// `u_α` at tensor node `q`.
    pub fn value_at_node(&self, alpha: &MultiIndex, q: usize) -> T {
        let digits = self.node_digits(q);
        (0..self.dim).fold(T::one(), |acc, d| acc * self.table[alpha[d]][digits[d]])
    }

    /// `u_α(y)` at an arbitrary point.
    pub fn eval(&self, alpha: &MultiIndex, y: &[T]) -> T {
        (0..self.dim).fold(T::one(), |acc, d| acc * hermite_eval(alpha[d], y[d]))
    }

    /// All basis functions in block order, each sampled on the tensor nodes.
    pub fn sample_all(&self) -> Vec<(MultiIndex, Vec<T>)> {
        let nodes = self.node_count();
        self.blocks
            .iter()
            .flatten()
            .map(|a| (*a, (0..nodes).map(|q| self.value_at_node(a, q)).collect()))
            .collect()
    }

    /// `max |⟨u_α, u_β⟩ − δ_αβ|` under the stored quadrature.
    pub fn orthonormality_error(&self) -> T {
        let samples = self.sample_all();
        let w: Vec<T> = (0..self.node_count()).map(|q| self.node_weight(q)).collect();
        samples
            .par_iter()
            .enumerate()
            .map(|(i, (_, ui))| {
                let mut worst = T::zero();
                for (j, (_, uj)) in samples.iter().enumerate().skip(i) {
                    let g = compensated_sum(ui.iter().zip(uj).zip(&w).map(|((a, b), c)| *a * *b * *c));
                    let target = if i == j { T::one() } else { T::zero() };
                    worst = worst.max((g - target).abs());
                }
                worst
            })
            .reduce(T::zero, T::max)
    }

    /// `max_α ‖H u_α − λ_α u_α‖` with `H` applied through the ladder
    /// identities for `ψ''` and pointwise multiplication by `|y|²`.
    pub fn eigen_residual(&self) -> T {
        let m = self.quad.len();
        // 1D residual rows r_k(y_q) = -ψ_k'' + y²ψ_k - (2k+1)ψ_k
        let half = T::c(0.5);
        let resid: Vec<Vec<T>> = (0..=self.kmax)
            .map(|k| {
                let kf = T::from_usize_lossy(k);
                (0..m)
                    .map(|q| {
                        let y = self.quad.nodes()[q];
                        let lower = if k >= 2 {
                            (kf * (kf - T::one())).sqrt() * self.table[k - 2][q]
                        } else {
                            T::zero()
                        };
                        let upper = ((kf + T::one()) * (kf + T::c(2.0))).sqrt() * self.table[k + 2][q];
                        let mid = (T::c(2.0) * kf + T::one()) * self.table[k][q];
                        let second = half * (lower - mid + upper);
                        -second + y * y * self.table[k][q] - mid
                    })
                    .collect()
            })
            .collect();
        let alphas: Vec<MultiIndex> = self.blocks.iter().flatten().copied().collect();
        alphas
            .par_iter()
            .map(|a| {
                let sq = compensated_sum((0..self.node_count()).map(|q| {
                    let digits = self.node_digits(q);
                    let mut r = T::zero();
                    for d in 0..self.dim {
                        let mut term = resid[a[d]][digits[d]];
                        for e in 0..self.dim {
                            if e != d {
                                term *= self.table[a[e]][digits[e]];
                            }
                        }
                        r += term;
                    }
                    r * r * self.node_weight(q)
                }));
                sq.sqrt()
            })
            .reduce(T::zero, T::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ground_state_and_parity() {
        assert_relative_eq!(hermite_eval(0, 0.0_f64), std::f64::consts::PI.powf(-0.25), max_relative = 1e-15);
        assert_eq!(hermite_eval(1, 0.0_f64), 0.0);
        for k in 0..20 {
            let a = hermite_eval(k, 0.7_f64);
            let b = hermite_eval(k, -0.7_f64);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert_relative_eq!(a, sign * b, max_relative = 1e-14);
        }
    }

    #[test]
    fn matches_closed_forms() {
        let y = 1.3_f64;
        let g = std::f64::consts::PI.powf(-0.25) * (-y * y / 2.0).exp();
        assert_relative_eq!(hermite_eval(1, y), g * 2.0_f64.sqrt() * y, max_relative = 1e-14);
        assert_relative_eq!(
            hermite_eval(2, y),
            g * (2.0 * y * y - 1.0) / 2.0_f64.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn far_tail_underflows_to_zero() {
        assert_eq!(hermite_eval(3, 60.0_f64), 0.0);
        // f32 survives where e^{-y²/2} alone would underflow
        let v = hermite_eval(100, 13.0_f32);
        let w = hermite_eval(100, 13.0_f64);
        assert!((v as f64 - w).abs() <= 1e-4 * w.abs());
        assert!(w.abs() > 1e-3);
    }

    #[test]
    fn recurrence_matches_high_precision_reference() {
        let text = include_str!("../../tests/fixtures/hermite_y1.csv");
        let vals = hermite_all(50, 1.0_f64);
        let mut rows = 0;
        for line in text.lines().skip(1) {
            let (k, v) = line.split_once(',').unwrap();
            let k: usize = k.parse().unwrap();
            let v: f64 = v.parse().unwrap();
            assert!((vals[k] - v).abs() <= 1e-14 * v.abs().max(1e-3), "k = {k}");
            rows += 1;
        }
        assert_eq!(rows, 51);
    }

    #[test]
    fn derivative_ladder_matches_finite_difference() {
        let (v, d) = hermite_with_derivative(12, 0.4_f64);
        let h = 1e-6;
        let up = hermite_all(12, 0.4 + h);
        let dn = hermite_all(12, 0.4 - h);
        for k in 0..=12 {
            assert_relative_eq!(d[k], (up[k] - dn[k]) / (2.0 * h), epsilon = 1e-8);
            assert_eq!(v[k], hermite_eval(k, 0.4));
        }
    }

    #[test]
    fn quadrature_moments() {
        for order in [1, 2, 5, 40, 211] {
            let gh = GaussHermite::<f64>::new(order);
            assert_eq!(gh.len(), order);
            let m0: f64 = gh.nodes().iter().zip(gh.weights()).map(|(y, w)| w * (-y * y).exp()).sum();
            assert_relative_eq!(m0, std::f64::consts::PI.sqrt(), max_relative = 1e-12);
            if order >= 2 {
                let m2: f64 = gh
                    .nodes()
                    .iter()
                    .zip(gh.weights())
                    .map(|(y, w)| w * y * y * (-y * y).exp())
                    .sum();
                assert_relative_eq!(m2, std::f64::consts::PI.sqrt() / 2.0, max_relative = 1e-12);
            }
            assert!(gh.nodes().windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn block_multiplicities() {
        let b = HermiteBasis::<f64>::new(2, 10).unwrap();
        assert_eq!(b.block(4).unwrap(), &[[1, 0, 0], [0, 1, 0]]);
        assert_eq!(b.eigenvalues(), vec![2, 4, 6, 8, 10]);
        let b3 = HermiteBasis::<f64>::new(3, 9).unwrap();
        assert_eq!(b3.block(7).unwrap().len(), 6);
        assert!(matches!(b.block(5), Err(Error::InvalidEigenvalue { .. })));
        assert!(matches!(b.block(12), Err(Error::InvalidEigenvalue { .. })));
        assert!(HermiteBasis::<f64>::new(4, 10).is_err());
    }

    #[test]
    fn small_basis_is_orthonormal_eigenbasis() {
        for dim in 1..=3 {
            let b = HermiteBasis::<f64>::new(dim, 12).unwrap();
            assert!(b.orthonormality_error() < 1e-12, "dim {dim}");
            assert!(b.eigen_residual() < 1e-10, "dim {dim}");
        }
    }
}
