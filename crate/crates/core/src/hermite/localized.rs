//! Empirical constants for localized and `L^p` bounds of spectral projectors.

use super::basis::{hermite_all, hermite_with_derivative, HermiteBasis};
use super::spectral::SpectralVector;
use crate::error::{Error, Result};
use crate::scalar::compensated_sum;
use crate::smooth::step_poly9;
use crate::Scalar;

/// Radial cutoff in `ρ = |y|/R`: 1 on `ρ ≤ 1`, 0 on `ρ ≥ 2`; value and `d/dρ`.
pub fn ball_cutoff<T: Scalar>(rho: T) -> [T; 2] {
    let s = step_poly9(rho - T::one());
    [T::one() - s[0], -s[1]]
}

/// Worst ratios over an ensemble:
/// `R^{-1/2} λ^{1/4} ‖χ_R Π_λ f‖ / ‖f‖` and `R^{-1/2} λ^{-1/4} ‖χ_R ∇Π_λ f‖ / ‖f‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizedRatio<T> {
    pub value: T,
    pub gradient: T,
}

/// Localized projection ratios, integrating on a uniform grid over
/// `[-2R, 2R]^dim` fine enough to resolve the eigenfunction oscillations.
pub fn localized_ratio<T: Scalar>(
    basis: &HermiteBasis<T>,
    lambda: i64,
    radius: T,
    ensemble: &[SpectralVector<T>],
) -> Result<LocalizedRatio<T>> {
    let alphas = basis.block(lambda)?;
    let lam = T::from_i64_lossy(lambda);
    if radius < T::one() || radius > lam.sqrt() / T::c(2.0) {
        return Err(Error::Domain(format!(
            "radius {radius} outside [1, sqrt(lambda)/2] for lambda {lambda}"
        )));
    }
    let dim = basis.dim();
    let k_top = ((lambda as usize) - dim) / 2;
    // about 16 points per local wavelength 2π/√λ
    let per_axis = {
        let want = (T::c(4.0) * radius * lam.sqrt() * T::c(16.0) / T::TAU()).ceil().to_f64_lossy() as usize;
        let cap = match dim {
            1 => 20_001,
            2 => 801,
            _ => 161,
        };
        (want.max(201) | 1).min(cap)
    };
    let h = T::c(4.0) * radius / T::from_usize_lossy(per_axis - 1);
    let xs: Vec<T> = (0..per_axis).map(|i| -T::c(2.0) * radius + h * T::from_usize_lossy(i)).collect();
    let tables: Vec<(Vec<T>, Vec<T>)> = xs.iter().map(|&x| hermite_with_derivative(k_top, x)).collect();
    let cell = h.powi(dim as i32);

    let block_index = basis.block_of(lambda)?;
    let mut worst = LocalizedRatio {
        value: T::zero(),
        gradient: T::zero(),
    };
    for f in ensemble {
        let norm = f.norm();
        if norm == T::zero() {
            continue;
        }
        let coeffs = &f.blocks()[block_index];
        let total = per_axis.pow(dim as u32);
        let mut vals = Vec::with_capacity(total);
        let mut grads = Vec::with_capacity(total);
        for p in 0..total {
            let mut idx = [0usize; 3];
            let mut rest = p;
            for d in (0..dim).rev() {
                idx[d] = rest % per_axis;
                rest /= per_axis;
            }
            let r = (0..dim).map(|d| xs[idx[d]] * xs[idx[d]]).fold(T::zero(), |a, b| a + b).sqrt();
            let chi = ball_cutoff(r / radius)[0];
            if chi == T::zero() {
                continue;
            }
            let mut u = num_complex::Complex::new(T::zero(), T::zero());
            let mut g = [num_complex::Complex::new(T::zero(), T::zero()); 3];
            for (a, c) in alphas.iter().zip(coeffs) {
                let mut prod = T::one();
                for d in 0..dim {
                    prod *= tables[idx[d]].0[a[d]];
                }
                u += *c * prod;
                for (e, ge) in g.iter_mut().enumerate().take(dim) {
                    let mut pe = T::one();
                    for d in 0..dim {
                        pe *= if d == e { tables[idx[d]].1[a[d]] } else { tables[idx[d]].0[a[d]] };
                    }
                    *ge += *c * pe;
                }
            }
            vals.push(chi * chi * u.norm_sqr());
            grads.push(chi * chi * g.iter().map(|z| z.norm_sqr()).fold(T::zero(), |a, b| a + b));
        }
        let local = (compensated_sum(vals) * cell).sqrt();
        let local_grad = (compensated_sum(grads) * cell).sqrt();
        let scale = radius.sqrt().recip();
        worst.value = worst.value.max(scale * lam.powf(T::c(0.25)) * local / norm);
        worst.gradient = worst.gradient.max(scale * lam.powf(T::c(-0.25)) * local_grad / norm);
    }
    Ok(worst)
}

/// `max λ^{1/4} |ψ_k(x)|` over `|x| ≤ ½ λ^{1/2}`, `λ = 2k + 1`, sampled on a
/// grid of `samples` points.
pub fn pointwise_ratio<T: Scalar>(lambda: usize, samples: usize) -> T {
    let k = (lambda - 1) / 2;
    let lam = T::from_usize_lossy(lambda);
    let half = lam.sqrt() / T::c(2.0);
    let n = samples.max(2);
    (0..n)
        .map(|i| {
            let x = half * T::from_usize_lossy(i) / T::from_usize_lossy(n - 1);
            hermite_all(k, x)[k].abs()
        })
        .fold(T::zero(), T::max)
        * lam.powf(T::c(0.25))
}

/// One-dimensional `‖Π_λ f‖_{L^q} / ‖f‖_{L^{q'}}` over an ensemble, the
/// largest value returned.
pub fn lp_projection_ratio<T: Scalar>(
    basis: &HermiteBasis<T>,
    lambda: i64,
    q: T,
    ensemble: &[SpectralVector<T>],
) -> Result<T> {
    if basis.dim() != 1 {
        return Err(Error::Domain("L^p projection ratios are one-dimensional".into()));
    }
    let b = basis.block_of(lambda)?;
    let kmax = basis.max_degree();
    let qp = q / (q - T::one());
    let reach = T::from_usize_lossy(2 * kmax + 1).sqrt() + T::c(8.0);
    let n = 8001;
    let h = T::c(2.0) * reach / T::from_usize_lossy(n - 1);
    let table: Vec<Vec<T>> = (0..n)
        .map(|i| hermite_all(kmax, -reach + h * T::from_usize_lossy(i)))
        .collect();
    let mut worst = T::zero();
    for f in ensemble {
        let coeff = f.blocks()[b][0];
        let mut num = Vec::with_capacity(n);
        let mut den = Vec::with_capacity(n);
        for row in &table {
            let mut v = num_complex::Complex::new(T::zero(), T::zero());
            for (k, block) in f.blocks().iter().enumerate() {
                v += block[0] * row[k];
            }
            num.push((coeff * row[b]).norm().powf(q));
            den.push(v.norm().powf(qp));
        }
        let top = (compensated_sum(num) * h).powf(q.recip());
        let bottom = (compensated_sum(den) * h).powf(qp.recip());
        if bottom > T::zero() {
            worst = worst.max(top / bottom);
        }
    }
    Ok(worst)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fitted_exponent<T: Scalar>(xs: &[T], ys: &[T]) -> T {
    let n = T::from_usize_lossy(xs.len());
    let lx: Vec<T> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<T> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().fold(T::zero(), |a, b| a + *b) / n;
    let my = ly.iter().fold(T::zero(), |a, b| a + *b) / n;
    let cov = lx.iter().zip(&ly).fold(T::zero(), |a, (x, y)| a + (*x - mx) * (*y - my));
    let var = lx.iter().fold(T::zero(), |a, x| a + (*x - mx) * (*x - mx));
    cov / var
}
