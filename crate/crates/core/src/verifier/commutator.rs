//! Positivity of the commutator of the conjugated operator.
//!
//! For `ψ = h + δ₂φ` the quadratic form of
//! `[L^r, L^i] = ψ_ss + 4ψ_y ψ_yy ψ_y − 4∂ψ_yy∂ − 4yψ_y + 4ψ_y ψ_sy − Δ²ψ`
//! is `∫ Z|v|² + 4 ∇v̄·ψ_yy∇v`, with `Z` the zero-order coefficient. Since
//! `ψ` is radial, `ψ_yy = ψ_rr ŷ⊗ŷ + (ψ_r/r)(I − ŷ⊗ŷ)`, so all coefficients
//! are tabulated on an `(s, r)` grid and the `y`-integral runs in polar
//! coordinates: Gauss–Legendre panels in `r`, equispaced directions.

use std::time::Instant;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::report::{BoundKind, RatioReport};
use crate::error::{Error, Result};
use crate::smooth::{bump_inf, step_poly9};
use crate::weights::{audit_phi, AuxWeights, Psi};

type C64 = Complex<f64>;

/// One Gaussian wave packet `amp · e^{-|y−c|²/(2w²)} e^{i ξ·y}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WavePacket {
    pub center: [f64; 3],
    pub width: f64,
    pub freq: [f64; 3],
    pub amp: C64,
}

/// Sum of packets times a radial cutoff vanishing for `|y| ≥ radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialProfile {
    pub dim: usize,
    pub radius: f64,
    pub packets: Vec<WavePacket>,
}

impl SpatialProfile {
    /// Three to six packets centered in the ball of radius `0.8·radius`,
    /// widths in `[1, 3]`, frequencies of size at most `0.75`.
    pub fn random(dim: usize, radius: f64, rng: &mut impl Rng) -> Self {
        let count = rng.gen_range(3..=6);
        let packets = (0..count)
            .map(|_| {
                let mut center = [0.0; 3];
                loop {
                    for c in center.iter_mut().take(dim) {
                        *c = rng.gen_range(-0.8..0.8) * radius;
                    }
                    if center.iter().map(|c| c * c).sum::<f64>() <= (0.8 * radius).powi(2) {
                        break;
                    }
                }
                let mut freq = [0.0; 3];
                for f in freq.iter_mut().take(dim) {
                    *f = rng.gen_range(-0.75..0.75) / (dim as f64).sqrt();
                }
                WavePacket {
                    center,
                    width: rng.gen_range(1.0..3.0),
                    freq,
                    amp: Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                }
            })
            .collect();
        Self { dim, radius, packets }
    }

    /// Value and gradient at `y`.
    pub fn eval(&self, y: &[f64]) -> (C64, [C64; 3]) {
        let zero = Complex::new(0.0, 0.0);
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        // cutoff 1 on r ≤ 0.75R, 0 on r ≥ R
        let step = step_poly9((r / self.radius - 0.75) / 0.25);
        let cut = 1.0 - step[0];
        if cut == 0.0 {
            return (zero, [zero; 3]);
        }
        let dcut = -step[1] / (0.25 * self.radius);
        let mut val = zero;
        let mut grad = [zero; 3];
        for p in &self.packets {
            let mut d2 = 0.0;
            let mut phase = 0.0;
            for k in 0..self.dim {
                let d = y[k] - p.center[k];
                d2 += d * d;
                phase += p.freq[k] * y[k];
            }
            let g = p.amp * (-d2 / (2.0 * p.width * p.width)).exp() * Complex::from_polar(1.0, phase);
            val += g;
            for k in 0..self.dim {
                let d = y[k] - p.center[k];
                grad[k] += g * Complex::new(-d / (p.width * p.width), p.freq[k]);
            }
        }
        let mut out = [zero; 3];
        for k in 0..self.dim {
            let radial = if r > 0.0 { dcut * y[k] / r } else { 0.0 };
            out[k] = grad[k] * cut + val * radial;
        }
        (val * cut, out)
    }
}

/// `v(s, y) = Σ_m b_m(s) V_m(y)` with C^∞ bumps `b_m` in time.
#[derive(Debug, Clone, PartialEq)]
pub struct TestField {
    pub dim: usize,
    pub radius: f64,
    pub terms: Vec<((f64, f64), SpatialProfile)>,
}

impl TestField {
    /// Two terms with bumps on random subintervals of the middle of `[a, b]`.
    pub fn random(dim: usize, radius: f64, (a, b): (f64, f64), rng: &mut impl Rng) -> Self {
        let span = b - a;
        let terms = (0..2)
            .map(|_| {
                let lo = a + span * rng.gen_range(0.05..0.4);
                let hi = a + span * rng.gen_range(0.6..0.95);
                ((lo, hi), SpatialProfile::random(dim, radius, rng))
            })
            .collect();
        Self { dim, radius, terms }
    }
}

/// Seeded ensemble, member `k` drawn from stream `seed + k`.
pub fn field_ensemble(dim: usize, radius: f64, domain: (f64, f64), size: usize, seed: u64) -> Vec<TestField> {
    (0..size)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            TestField::random(dim, radius, domain, &mut rng)
        })
        .collect()
}

/// Resolution of the polar quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormResolution {
    /// Time samples (trapezoid) across the weight's domain.
    pub time_points: usize,
    /// Width of each four-point Gauss–Legendre panel in `r`.
    pub panel: f64,
    /// Target arc length between directions.
    pub arc: f64,
}

impl Default for FormResolution {
    fn default() -> Self {
        Self { time_points: 121, panel: 1.0, arc: 0.35 }
    }
}

const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

struct PolarNode {
    radial: usize,
    y: [f64; 3],
    dir: [f64; 3],
    weight: f64,
}

fn polar_nodes(dim: usize, radius: f64, res: FormResolution) -> (Vec<f64>, Vec<PolarNode>) {
    let panels = (radius / res.panel).ceil().max(1.0) as usize;
    let h = radius / panels as f64;
    let mut radii = Vec::new();
    let mut rweights = Vec::new();
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (x, w) in GL4 {
            radii.push(mid + 0.5 * h * x);
            rweights.push(0.5 * h * w);
        }
    }
    let mut nodes = Vec::new();
    for (k, (&r, &wr)) in radii.iter().zip(&rweights).enumerate() {
        let dirs: Vec<[f64; 3]> = match dim {
            1 => vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
            2 => {
                let m = ((std::f64::consts::TAU * r / res.arc).ceil() as usize).max(16);
                (0..m)
                    .map(|j| {
                        let th = std::f64::consts::TAU * (j as f64 + 0.5) / m as f64;
                        [th.cos(), th.sin(), 0.0]
                    })
                    .collect()
            }
            _ => {
                let m = ((4.0 * std::f64::consts::PI * r * r / (res.arc * res.arc)).ceil() as usize).max(32);
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                (0..m)
                    .map(|j| {
                        let z = 1.0 - 2.0 * (j as f64 + 0.5) / m as f64;
                        let rho = (1.0 - z * z).sqrt();
                        let th = golden * j as f64;
                        [rho * th.cos(), rho * th.sin(), z]
                    })
                    .collect()
            }
        };
        let sphere = match dim {
            1 => 2.0,
            2 => std::f64::consts::TAU * r,
            _ => 4.0 * std::f64::consts::PI * r * r,
        } / dirs.len() as f64;
        for dir in dirs {
            let y = [r * dir[0], r * dir[1], r * dir[2]];
            nodes.push(PolarNode { radial: k, y, dir, weight: wr * sphere });
        }
    }
    (radii, nodes)
}

/// Coefficients of the form and of the lower bound at one `(s, r)`.
#[derive(Debug, Clone, Copy)]
struct Coefficients {
    zero: f64,
    radial: f64,
    angular: f64,
    curvature: f64,
    interior: f64,
    perp: f64,
    rest: f64,
}

fn coefficients(psi: &Psi<f64>, aux: &AuxWeights<f64>, dim: usize, s: f64, r: f64) -> Coefficients {
    let mut y = vec![0.0; dim];
    y[0] = r;
    let p = psi.point(s, &y);
    let (g, gs) = (p.grad[0], p.grad_s[0]);
    let rest = -4.0 * r * g + 4.0 * g * gs - p.bilap;
    let a = aux.eval(s, r);
    let scale = psi.delta2 / psi.h.tau();
    Coefficients {
        zero: p.dss + 4.0 * g * g * p.hess[0] + rest,
        radial: p.hess[0],
        angular: g / r,
        curvature: psi.h.eval(s)[2],
        interior: scale * a.a_int.powi(4),
        perp: scale * a.a_perp.powi(4),
        rest,
    }
}

/// Largest entry of `ψ_yy` from Cartesian derivatives minus its radial
/// assembly, over `samples` random points with `1 ≤ |y| ≤ 2.5 τ^{1/2}`.
pub fn radial_hessian_mismatch(psi: &Psi<f64>, dim: usize, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = psi.h.domain();
    let top = 2.5 * psi.h.tau().sqrt();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let s = rng.gen_range(a..b);
        let r = rng.gen_range(1.0..top);
        let mut y: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = y.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        y.iter_mut().for_each(|v| *v *= r / n);
        let direct = psi.point(s, &y).hess;
        let split = psi.radial_hessian(s, &y);
        let scale = direct.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        for (u, v) in direct.iter().zip(&split) {
            worst = worst.max((u - v).abs() / scale);
        }
    }
    worst
}

/// Ratio of the commutator form to the lower bound
/// `‖(h'')^{1/2}v‖² + δ₂τ^{-1}(‖a_int²∇v‖² + ‖a_⊥²∇_⊥v‖²)` for each member,
/// and the pointwise constant `C` of `|−4yψ_y + 4ψ_yψ_sy − Δ²ψ| ≤ Cδ₂h''`.
pub fn check_commutator(
    psi: &Psi<f64>,
    aux: &AuxWeights<f64>,
    ensemble: &[TestField],
    res: FormResolution,
) -> Result<RatioReport> {
    let start = Instant::now();
    let first = ensemble.first().ok_or_else(|| Error::Domain("empty ensemble".into()))?;
    let dim = first.dim;
    if !(1..=3).contains(&dim) {
        return Err(Error::Domain(format!("dimension {dim} outside 1..=3")));
    }
    let tau = psi.h.tau();
    let radius = ensemble.iter().map(|f| f.radius).fold(0.0, f64::max);
    if radius * radius > 9.0 * tau * (1.0 + 1e-12) || ensemble.iter().any(|f| f.dim != dim) {
        return Err(Error::Support(format!("test fields reach |y| = {radius}, beyond 3 tau^(1/2)")));
    }
    let (a, b) = psi.h.domain();
    let nt = res.time_points.max(3);
    let ds = (b - a) / (nt - 1) as f64;
    let times: Vec<f64> = (0..nt).map(|k| a + ds * k as f64).collect();
    let (radii, nodes) = polar_nodes(dim, radius, res);
    let table: Vec<Vec<Coefficients>> =
        times.par_iter().map(|&s| radii.iter().map(|&r| coefficients(psi, aux, dim, s, r)).collect()).collect();

    let mut pointwise: f64 = 0.0;
    for row in &table {
        for c in row {
            if c.rest != 0.0 {
                pointwise = pointwise.max(c.rest.abs() / (psi.delta2 * c.curvature));
            }
        }
    }

    let ratios: Vec<f64> = ensemble
        .par_iter()
        .map(|field| {
            let samples: Vec<Vec<(C64, [C64; 3])>> =
                field.terms.iter().map(|(_, prof)| nodes.iter().map(|n| prof.eval(&n.y[..dim])).collect()).collect();
            let mut form = Vec::with_capacity(nt);
            let mut lower = Vec::with_capacity(nt);
            for (k, &s) in times.iter().enumerate() {
                let bumps: Vec<f64> = field.terms.iter().map(|((lo, hi), _)| bump_inf(s, *lo, *hi)[0]).collect();
                if bumps.iter().all(|b| *b == 0.0) {
                    form.push(0.0);
                    lower.push(0.0);
                    continue;
                }
                let trap = if k == 0 || k + 1 == nt { 0.5 } else { 1.0 };
                let (mut q, mut l) = (0.0, 0.0);
                for (p, node) in nodes.iter().enumerate() {
                    let mut v = Complex::new(0.0, 0.0);
                    let mut g = [Complex::new(0.0, 0.0); 3];
                    for (m, b) in bumps.iter().enumerate() {
                        if *b != 0.0 {
                            let (val, grad) = samples[m][p];
                            v += val * *b;
                            for d in 0..dim {
                                g[d] += grad[d] * *b;
                            }
                        }
                    }
                    let c = &table[k][node.radial];
                    let v2 = v.norm_sqr();
                    let g2: f64 = g[..dim].iter().map(|z| z.norm_sqr()).sum();
                    let dr = (0..dim).fold(Complex::new(0.0, 0.0), |acc, d| acc + g[d] * node.dir[d]).norm_sqr();
                    let perp = (g2 - dr).max(0.0);
                    q += node.weight * (c.zero * v2 + 4.0 * (c.radial * dr + c.angular * perp));
                    l += node.weight * (c.curvature * v2 + c.interior * g2 + c.perp * perp);
                }
                form.push(trap * q);
                lower.push(trap * l);
            }
            let q = crate::scalar::compensated_sum(form);
            let l = crate::scalar::compensated_sum(lower);
            if l > 0.0 {
                q / l
            } else {
                f64::NAN
            }
        })
        .collect();

    let phi = audit_phi(&psi.phi, 6);
    let phi_constant = phi.bound_upper.max(phi.time_upper);
    let report = RatioReport::new(
        format!("commutator(n={dim},tau={tau:.6},delta2={})", psi.delta2),
        BoundKind::Positive,
        0.0,
        0.0,
        &ratios,
    )
    .require("pointwise", pointwise <= 1e3 * phi_constant)
    .record("pointwise_constant", pointwise)
    .record("phi_constant", phi_constant)
    .record("polar_nodes", nodes.len() as f64);
    Ok(report.timed(start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{DyadicIndex, PartitionWindow};
    use crate::regularize::{finalize, AlphaTable, EpsilonTable};
    use crate::weights::{build_h, build_phi, build_psi};

    fn spike_table() -> EpsilonTable<f64> {
        let w = PartitionWindow::new(4f64.exp(), 5).unwrap();
        let spike = DyadicIndex::new(3, 1);
        finalize(&AlphaTable::from_fn(w, |i| if i == spike { 0.4 } else { 0.0 }).unwrap()).unwrap()
    }

    fn coarse() -> FormResolution {
        FormResolution { time_points: 41, panel: 1.0, arc: 0.6 }
    }

    #[test]
    fn profile_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let prof = SpatialProfile::random(2, 10.0, &mut rng);
        let y = [1.3, -2.1];
        let (_, g) = prof.eval(&y);
        for d in 0..2 {
            let mut p = y;
            let mut m = y;
            p[d] += 1e-5;
            m[d] -= 1e-5;
            let fd = (prof.eval(&p).0 - prof.eval(&m).0) / 2e-5;
            assert!((fd - g[d]).norm() < 1e-7 * (1.0 + g[d].norm()));
        }
        assert_eq!(prof.eval(&[10.0, 0.1]).0, Complex::new(0.0, 0.0));
    }

    #[test]
    fn polar_quadrature_integrates_gaussians() {
        for dim in 1..=3 {
            let (_, nodes) = polar_nodes(dim, 12.0, FormResolution { time_points: 3, panel: 0.5, arc: 0.3 });
            let total: f64 = nodes.iter().map(|n| n.weight * (-(n.y[0].powi(2) + n.y[1].powi(2) + n.y[2].powi(2))).exp()).sum();
            let exact = std::f64::consts::PI.powf(dim as f64 / 2.0);
            assert!((total - exact).abs() < 1e-6 * exact, "dim {dim}: {total} vs {exact}");
        }
    }

    #[test]
    fn pure_time_weight_gives_ratio_one() {
        let eps = spike_table();
        let psi = build_psi(build_h(&eps).unwrap(), build_phi(&eps), 0.0).unwrap();
        let aux = AuxWeights::new(&eps);
        let radius = 3.0 * psi.h.tau().sqrt();
        let ens = field_ensemble(1, radius, psi.h.domain(), 3, 1);
        let r = check_commutator(&psi, &aux, &ens, coarse()).unwrap();
        assert!((r.min_ratio - 1.0).abs() < 1e-14 && (r.max_ratio - 1.0).abs() < 1e-14, "{}", r.summary());
        assert_eq!(r.extra("pointwise_constant"), Some(0.0));
    }

    #[test]
    fn spike_table_is_positive_in_two_dimensions() {
        let eps = spike_table();
        let psi = build_psi(build_h(&eps).unwrap(), build_phi(&eps), 0.01).unwrap();
        let aux = AuxWeights::new(&eps);
        let radius = 3.0 * psi.h.tau().sqrt();
        let ens = field_ensemble(2, radius, psi.h.domain(), 4, 5);
        let r = check_commutator(&psi, &aux, &ens, coarse()).unwrap();
        assert!(r.pass, "{}", r.summary());
    }

    #[test]
    fn support_violation_is_an_error() {
        let eps = spike_table();
        let psi = build_psi(build_h(&eps).unwrap(), build_phi(&eps), 0.01).unwrap();
        let aux = AuxWeights::new(&eps);
        let radius = 3.1 * psi.h.tau().sqrt();
        let ens = field_ensemble(1, radius, psi.h.domain(), 1, 5);
        assert!(matches!(check_commutator(&psi, &aux, &ens, coarse()), Err(Error::Support(_))));
    }

    #[test]
    fn radial_split_matches_the_cartesian_hessian() {
        let eps = spike_table();
        let psi = build_psi(build_h(&eps).unwrap(), build_phi(&eps), 0.01).unwrap();
        for dim in [2, 3] {
            assert!(radial_hessian_mismatch(&psi, dim, 200, 3) < 1e-10);
        }
    }
}
