//! Coefficient vectors in the Hermite eigenbasis, projectors and the resolvent.

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;

use super::basis::{HermiteBasis, MultiIndex};
use crate::error::{Error, Result};
use crate::scalar::compensated_sum;
use crate::Scalar;

/// Smallest admissible distance between a resolvent parameter and the spectrum.
pub const RESOLVENT_FLOOR: f64 = 1e-6;

/// Distance from `z` to the full spectrum `dim + 2ℕ` of `H`.
pub fn spectrum_distance<T: Scalar>(dim: usize, z: Complex<T>) -> T {
    let n = T::from_usize_lossy(dim);
    let k = ((z.re - n) / T::c(2.0)).round().max(T::zero());
    let nearest = n + T::c(2.0) * k;
    (z - Complex::new(nearest, T::zero())).norm()
}

/// Coefficients of a function in the truncated Hermite eigenbasis, grouped
/// by eigenvalue: block `b` belongs to `λ = dim + 2b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVector<T> {
    dim: usize,
    blocks: Vec<Vec<Complex<T>>>,
}

impl<T: Scalar> SpectralVector<T> {
    pub fn zeros(basis: &HermiteBasis<T>) -> Self {
        Self {
            dim: basis.dim(),
            blocks: basis.blocks().iter().map(|b| vec![Complex::new(T::zero(), T::zero()); b.len()]).collect(),
        }
    }

    /// Coefficients from nodal values on the basis' tensor quadrature grid.
    pub fn from_nodal(basis: &HermiteBasis<T>, values: &[Complex<T>]) -> Result<Self> {
        if values.len() != basis.node_count() {
            return Err(Error::GridMismatch(format!(
                "{} nodal values for {} quadrature nodes",
                values.len(),
                basis.node_count()
            )));
        }
        let weights: Vec<T> = (0..basis.node_count()).map(|q| basis.node_weight(q)).collect();
        let blocks = basis
            .blocks()
            .par_iter()
            .map(|block| block.iter().map(|a| nodal_inner(basis, a, values, &weights)).collect())
            .collect();
        Ok(Self { dim: basis.dim(), blocks })
    }

    /// Nodal values of the represented function on the quadrature grid.
    pub fn to_nodal(&self, basis: &HermiteBasis<T>) -> Vec<Complex<T>> {
        (0..basis.node_count())
            .into_par_iter()
            .map(|q| {
                let mut acc = Complex::new(T::zero(), T::zero());
                for (block, coeffs) in basis.blocks().iter().zip(&self.blocks) {
                    for (a, c) in block.iter().zip(coeffs) {
                        acc += *c * basis.value_at_node(a, q);
                    }
                }
                acc
            })
            .collect()
    }

    /// Random coefficients, uniform in the unit square, on blocks with
    /// eigenvalue at most `band`.
    pub fn random(basis: &HermiteBasis<T>, band: usize, rng: &mut impl Rng) -> Self {
        let mut v = Self::zeros(basis);
        for (b, block) in v.blocks.iter_mut().enumerate() {
            if basis.dim() + 2 * b > band {
                continue;
            }
            for c in block.iter_mut() {
                *c = Complex::new(T::c(rng.gen_range(-1.0..1.0)), T::c(rng.gen_range(-1.0..1.0)));
            }
        }
        v
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Vec<Complex<T>>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Vec<Complex<T>>] {
        &mut self.blocks
    }

    /// Eigenvalue of block `b`.
    pub fn eigenvalue(&self, b: usize) -> T {
        T::from_usize_lossy(self.dim + 2 * b)
    }

    fn block_of(&self, lambda: i64) -> Result<usize> {
        let n = self.dim as i64;
        if lambda < n || (lambda - n) % 2 != 0 {
            return Err(Error::InvalidEigenvalue {
                lambda,
                reason: "not in the spectrum dim + 2N",
            });
        }
        let b = ((lambda - n) / 2) as usize;
        if b >= self.blocks.len() {
            return Err(Error::InvalidEigenvalue {
                lambda,
                reason: "above lambda_max",
            });
        }
        Ok(b)
    }

    pub fn block(&self, lambda: i64) -> Result<&[Complex<T>]> {
        Ok(&self.blocks[self.block_of(lambda)?])
    }

    /// `Π_λ` applied to the represented function.
    pub fn project(&self, lambda: i64) -> Result<Self> {
        let keep = self.block_of(lambda)?;
        let mut out = self.map_blocks(|_, _| Complex::new(T::zero(), T::zero()));
        out.blocks[keep].clone_from(&self.blocks[keep]);
        Ok(out)
    }

    pub fn norm_sqr(&self) -> T {
        compensated_sum(self.blocks.iter().flatten().map(|c| c.norm_sqr()))
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    /// `⟨self, other⟩`, linear in the first slot.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        let pairs: Vec<Complex<T>> = self
            .blocks
            .iter()
            .flatten()
            .zip(other.blocks.iter().flatten())
            .map(|(a, b)| *a * b.conj())
            .collect();
        Complex::new(
            compensated_sum(pairs.iter().map(|c| c.re)),
            compensated_sum(pairs.iter().map(|c| c.im)),
        )
    }

    /// Blockwise map `(eigenvalue, coefficient) -> coefficient`.
    pub fn map_blocks(&self, f: impl Fn(T, Complex<T>) -> Complex<T>) -> Self {
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(b, block)| {
                let lam = self.eigenvalue(b);
                block.iter().map(|c| f(lam, *c)).collect()
            })
            .collect();
        Self { dim: self.dim, blocks }
    }

    /// `H` applied spectrally.
    pub fn apply_h(&self) -> Self {
        self.map_blocks(|lam, c| c * lam)
    }

    /// `(H − z)` applied spectrally.
    pub fn apply_shifted(&self, z: Complex<T>) -> Self {
        self.map_blocks(|lam, c| c * (Complex::new(lam, T::zero()) - z))
    }

    /// `(H − z)^{-1}` applied spectrally.
    pub fn resolvent(&self, z: Complex<T>) -> Result<Self> {
        let distance = spectrum_distance(self.dim, z);
        if distance < T::c(RESOLVENT_FLOOR) {
            return Err(Error::NearSpectrum {
                distance: distance.to_f64_lossy(),
                floor: RESOLVENT_FLOOR,
            });
        }
        Ok(self.map_blocks(|lam, c| c / (Complex::new(lam, T::zero()) - z)))
    }

    pub fn scaled(&self, k: Complex<T>) -> Self {
        self.map_blocks(|_, c| c * k)
    }

    /// `self + k · other`.
    pub fn axpy(&self, k: Complex<T>, other: &Self) -> Self {
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| *x + *y * k).collect())
            .collect();
        Self { dim: self.dim, blocks }
    }

    /// Rows `(λ, α, coefficient)` in block order.
    pub fn entries<'a>(
        &'a self,
        basis: &'a HermiteBasis<T>,
    ) -> impl Iterator<Item = (usize, MultiIndex, Complex<T>)> + 'a {
        basis
            .blocks()
            .iter()
            .zip(&self.blocks)
            .enumerate()
            .flat_map(move |(b, (alphas, coeffs))| {
                alphas.iter().zip(coeffs).map(move |(a, c)| (self.dim + 2 * b, *a, *c))
            })
    }
}

fn nodal_inner<T: Scalar>(
    basis: &HermiteBasis<T>,
    alpha: &MultiIndex,
    values: &[Complex<T>],
    weights: &[T],
) -> Complex<T> {
    let terms: Vec<Complex<T>> = values
        .iter()
        .enumerate()
        .map(|(q, v)| *v * (weights[q] * basis.value_at_node(alpha, q)))
        .collect();
    Complex::new(
        compensated_sum(terms.iter().map(|c| c.re)),
        compensated_sum(terms.iter().map(|c| c.im)),
    )
}

/// Coefficients of `Π_λ f` for nodal samples `f`.
pub fn project<T: Scalar>(basis: &HermiteBasis<T>, values: &[Complex<T>], lambda: i64) -> Result<Vec<Complex<T>>> {
    let alphas = basis.block(lambda)?;
    if values.len() != basis.node_count() {
        return Err(Error::GridMismatch(format!(
            "{} nodal values for {} quadrature nodes",
            values.len(),
            basis.node_count()
        )));
    }
    let weights: Vec<T> = (0..basis.node_count()).map(|q| basis.node_weight(q)).collect();
    Ok(alphas.iter().map(|a| nodal_inner(basis, a, values, &weights)).collect())
}

/// Squared L² norm of nodal samples under the tensor quadrature.
pub fn nodal_norm_sqr<T: Scalar>(basis: &HermiteBasis<T>, values: &[Complex<T>]) -> T {
    compensated_sum(values.iter().enumerate().map(|(q, v)| v.norm_sqr() * basis.node_weight(q)))
}

/// Power-iteration estimate of `‖(H − z)^{-1}‖` on the truncated space.
///
/// Iterates `R*R` from a random start; the estimate is `‖R v‖` for the
/// final unit vector `v`.
pub fn resolvent_norm_estimate<T: Scalar>(
    basis: &HermiteBasis<T>,
    z: Complex<T>,
    iterations: usize,
    rng: &mut impl Rng,
) -> Result<T> {
    let mut v = SpectralVector::random(basis, basis.lambda_max(), rng);
    let mut estimate = T::zero();
    for _ in 0..iterations {
        let norm = v.norm();
        v = v.scaled(Complex::new(norm.recip(), T::zero()));
        let rv = v.resolvent(z)?;
        estimate = rv.norm();
        v = rv.resolvent(z.conj())?;
    }
    Ok(estimate)
}
