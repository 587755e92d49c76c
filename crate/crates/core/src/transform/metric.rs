//! Coordinate change normalizing a rough metric at a lattice of anchor points.
//!
//! Anchors sit at `(t_i, x_ij) = (e^{-4i}, e^{-2i+j} e₁)`; the choice of the
//! first axis is arbitrary since only `|x|` enters the partition. The map is
//! `χ(t, x) = Σ η_ij(t, x) g^{-1/2}(t_i, x_ij) x` with a partition of unity
//! `η_ij = A_i(−ln t / 4) · B_j(ln(1 + 2|x|/√t))` that equals 1 near each anchor.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::partition::locate_radius;
use crate::smooth::CenteredPartition;

/// Eigenvalues of a metric sample below this are treated as degenerate.
pub const EIGEN_FLOOR: f64 = 1e-8;

/// Anchor `(e^{-4i}, e^{-2i+j} e₁)` in dimension `dim`.
pub fn anchor_point(dim: usize, i: i64, j: i64) -> (f64, Vec<f64>) {
    let mut x = vec![0.0; dim];
    x[0] = ((-2 * i + j) as f64).exp();
    ((-4.0 * i as f64).exp(), x)
}

/// `g^{-1/2}` by symmetric eigendecomposition.
pub fn inverse_sqrt(g: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let sym = (g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_eig >= EIGEN_FLOOR) {
        return Err(Error::NotPositiveDefinite { t, min_eig });
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Index ranges of the anchor lattice: rows `i_min..=i_max`, columns `0..=j_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnchorLattice {
    pub i_min: i64,
    pub i_max: i64,
    pub j_max: i64,
}

impl AnchorLattice {
    pub fn new(i_min: i64, i_max: i64, j_max: i64) -> Result<Self> {
        if i_min < 0 || i_max < i_min || j_max < 0 {
            return Err(Error::Domain(format!(
                "invalid anchor lattice rows {i_min}..={i_max}, columns 0..={j_max}"
            )));
        }
        Ok(Self { i_min, i_max, j_max })
    }

    pub fn anchors(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (self.i_min..=self.i_max).flat_map(move |i| (0..=self.j_max).map(move |j| (i, j)))
    }

    fn slot(&self, i: i64, j: i64) -> usize {
        ((i - self.i_min) * (self.j_max + 1) + j) as usize
    }

    /// Anchors plus `per_cell` random points inside every cell `A_ij`.
    pub fn sample_points(&self, dim: usize, per_cell: usize, rng: &mut impl Rng) -> Vec<(f64, Vec<f64>)> {
        let mut pts = Vec::new();
        for (i, j) in self.anchors() {
            pts.push(anchor_point(dim, i, j));
            for _ in 0..per_cell {
                let sigma = i as f64 + rng.gen_range(0.02..0.98);
                let rho = j as f64 + rng.gen_range(0.02..0.98);
                let t = (-4.0 * sigma).exp();
                let r = t.sqrt() * (rho.exp() - 1.0) / 2.0;
                let mut dir: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                dir.iter_mut().for_each(|v| *v *= r / norm);
                pts.push((t, dir));
            }
        }
        pts
    }
}

/// Value and derivatives of one partition function at a point.
#[derive(Debug, Clone)]
pub struct EtaJet {
    pub value: f64,
    pub dt: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

/// The tensor-product partition of unity attached to an [`AnchorLattice`].
#[derive(Debug, Clone)]
pub struct LatticePartition {
    lattice: AnchorLattice,
    time: CenteredPartition<f64>,
    space: CenteredPartition<f64>,
}

impl LatticePartition {
    pub fn new(lattice: AnchorLattice) -> Self {
        let time = CenteredPartition::new((lattice.i_min..=lattice.i_max).map(|i| i as f64).collect());
        let space = CenteredPartition::new(
            (0..=lattice.j_max)
                .map(|j| (1.0 + 2.0 * (j as f64).exp()).ln())
                .collect(),
        );
        Self { lattice, time, space }
    }

    pub fn lattice(&self) -> AnchorLattice {
        self.lattice
    }

    /// Partition functions that may be nonzero at `(t, x)`, with derivatives.
    pub fn active(&self, t: f64, x: &[f64]) -> Vec<(i64, i64, EtaJet)> {
        let n = x.len();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let sqt = t.sqrt();
        let sigma = -t.ln() / 4.0;
        let rho = (2.0 * r / sqt).ln_1p();
        let sigma_t = -0.25 / t;
        let rho_t = -r / (t * sqt) / (1.0 + 2.0 * r / sqt);
        let f1 = 2.0 / (sqt + 2.0 * r);
        let f2 = -4.0 / ((sqt + 2.0 * r) * (sqt + 2.0 * r));
        let xv = DVector::from_column_slice(x);
        let mut out = Vec::new();
        for a in self.time.active(sigma) {
            let ta = self.time.bump(a, sigma);
            if ta.iter().all(|v| *v == 0.0) {
                continue;
            }
            for b in self.space.active(rho) {
                let sb = self.space.bump(b, rho);
                if sb.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let mut grad = DVector::zeros(n);
                let mut hess = DMatrix::zeros(n, n);
                if r > 0.0 && (sb[1] != 0.0 || sb[2] != 0.0) {
                    let u = &xv / r;
                    let uu = &u * u.transpose();
                    grad = &u * (ta[0] * sb[1] * f1);
                    let id = DMatrix::<f64>::identity(n, n);
                    hess = (&uu * (sb[2] * f1 * f1 + sb[1] * f2) + (id - &uu) * (sb[1] * f1 / r)) * ta[0];
                }
                let jet = EtaJet {
                    value: ta[0] * sb[0],
                    dt: ta[1] * sigma_t * sb[0] + ta[0] * sb[1] * rho_t,
                    grad,
                    hess,
                };
                out.push((self.lattice.i_min + a as i64, b as i64, jet));
            }
        }
        out
    }
}

/// One metric sample `g(t, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub g: DMatrix<f64>,
}

/// Scattered samples of a symmetric coefficient matrix `g(t, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    pub dim: usize,
    pub samples: Vec<MetricSample>,
}

fn same_point(t: f64, x: &[f64], s: &MetricSample) -> bool {
    let tol = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
    tol(t, s.t) && x.iter().zip(&s.x).all(|(a, b)| tol(*a, *b) || (a - b).abs() < 1e-300)
}

impl MetricField {
    pub fn from_fn(
        dim: usize,
        points: impl IntoIterator<Item = (f64, Vec<f64>)>,
        g: impl Fn(f64, &[f64]) -> DMatrix<f64>,
    ) -> Self {
        let samples = points
            .into_iter()
            .map(|(t, x)| MetricSample { g: g(t, &x), t, x })
            .collect();
        Self { dim, samples }
    }

    /// Sample at `(t, x)` up to relative rounding.
    pub fn find(&self, t: f64, x: &[f64]) -> Option<&MetricSample> {
        self.samples.iter().find(|s| same_point(t, x, s))
    }

    /// Linear normalization `g ↦ A g Aᵀ`, `A = g₀^{-1/2}`, sending `g₀` to the identity.
    pub fn normalized(&self, g0: &DMatrix<f64>) -> Result<Self> {
        let a = inverse_sqrt(g0, 0.0)?;
        let samples = self
            .samples
            .iter()
            .map(|s| MetricSample {
                t: s.t,
                x: s.x.clone(),
                g: &a * &s.g * a.transpose(),
            })
            .collect();
        Ok(Self { dim: self.dim, samples })
    }

    /// Reads rows `t, x_1..x_n, g_11..g_nn` (row-major), with a header line.
    pub fn read_csv(reader: impl Read, dim: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let width = 1 + dim + dim * dim;
        let mut samples = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            if rec.len() != width {
                return Err(Error::Parse(format!(
                    "row {}: expected {width} columns, found {}",
                    line + 2,
                    rec.len()
                )));
            }
            let vals: Vec<f64> = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {e}", line + 2))))
                .collect::<Result<_>>()?;
            samples.push(MetricSample {
                t: vals[0],
                x: vals[1..=dim].to_vec(),
                g: DMatrix::from_row_slice(dim, dim, &vals[1 + dim..]),
            });
        }
        Ok(Self { dim, samples })
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        write_matrix_rows(writer, self.dim, self.samples.iter().map(|s| (s.t, s.x.as_slice(), &s.g)))
    }
}

/// Writes `t, x…, m_11…m_nn` rows with 17 significant digits.
pub fn write_matrix_rows<'a>(
    writer: impl Write,
    dim: usize,
    rows: impl Iterator<Item = (f64, &'a [f64], &'a DMatrix<f64>)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=dim).map(|k| format!("x{k}")));
    for r in 1..=dim {
        header.extend((1..=dim).map(|c| format!("m{r}{c}")));
    }
    let io = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(&header).map_err(io)?;
    for (t, x, m) in rows {
        let mut rec = vec![format!("{t:.16e}")];
        rec.extend(x.iter().map(|v| format!("{v:.16e}")));
        for r in 0..dim {
            rec.extend((0..dim).map(|c| format!("{:.16e}", m[(r, c)])));
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

/// The assembled coordinate map.
#[derive(Debug, Clone)]
pub struct ChiMap {
    dim: usize,
    partition: LatticePartition,
    maps: Vec<DMatrix<f64>>,
}

/// `χ` at a point with `∂_x χ`, `∂²_x χ_l` for every component `l`, and `∂_t χ`.
#[derive(Debug, Clone)]
pub struct ChiJet {
    pub value: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub hessians: Vec<DMatrix<f64>>,
    pub dt: DVector<f64>,
}

/// Builds `χ` from the metric samples at the lattice anchors.
pub fn build_chi(metric: &MetricField, lattice: AnchorLattice) -> Result<ChiMap> {
    let mut maps = vec![DMatrix::identity(metric.dim, metric.dim); lattice.anchors().count()];
    for (i, j) in lattice.anchors() {
        let (t, x) = anchor_point(metric.dim, i, j);
        let sample = metric
            .find(t, &x)
            .ok_or_else(|| Error::GridMismatch(format!("no metric sample at anchor ({i}, {j})")))?;
        maps[lattice.slot(i, j)] = inverse_sqrt(&sample.g, t)?;
    }
    Ok(ChiMap {
        dim: metric.dim,
        partition: LatticePartition::new(lattice),
        maps,
    })
}

impl ChiMap {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lattice(&self) -> AnchorLattice {
        self.partition.lattice
    }

    /// The frozen linear map `g^{-1/2}(t_i, x_ij)`.
    pub fn anchor_map(&self, i: i64, j: i64) -> &DMatrix<f64> {
        &self.maps[self.partition.lattice.slot(i, j)]
    }

    /// Evaluates `χ = x + Σ η_ij (χ_ij − I) x` and its derivatives; written
    /// relative to the identity so that `χ_ij = I` for all anchors gives
    /// `χ(t, x) = x` without rounding.
    pub fn eval(&self, t: f64, x: &[f64]) -> ChiJet {
        let n = self.dim;
        let xv = DVector::from_column_slice(x);
        let mut value = xv.clone();
        let mut jacobian = DMatrix::identity(n, n);
        let mut hessians = vec![DMatrix::zeros(n, n); n];
        let mut dt = DVector::zeros(n);
        let id = DMatrix::<f64>::identity(n, n);
        for (i, j, eta) in self.partition.active(t, x) {
            let delta = self.anchor_map(i, j) - &id;
            if delta.iter().all(|v| *v == 0.0) {
                continue;
            }
            let dx = &delta * &xv;
            value += &dx * eta.value;
            dt += &dx * eta.dt;
            jacobian += &dx * eta.grad.transpose() + &delta * eta.value;
            for (l, h) in hessians.iter_mut().enumerate() {
                let row = delta.row(l).transpose();
                *h += &eta.hess * dx[l] + &row * eta.grad.transpose() + &eta.grad * row.transpose();
            }
        }
        ChiJet {
            value,
            jacobian,
            hessians,
            dt,
        }
    }
}

/// Transformed coefficients at one sample point.
#[derive(Debug, Clone)]
pub struct Pushforward {
    pub t: f64,
    pub x: Vec<f64>,
    /// `g̃ = Dχ g Dχᵀ`.
    pub g_tilde: DMatrix<f64>,
    /// First-order coefficient `b_l = ∂_t χ_l − (Dχ⁻¹)_{mk} ∂_m∂_i χ_k g^{ij} ∂_j χ_l`.
    pub drift: DVector<f64>,
    /// The second-derivative part of `drift`.
    pub drift_second: DVector<f64>,
    /// `d̃ = t x bᵀ / |x|²`, the minimal matrix with `x_k d̃^{kl} / t = b_l`; zero at `x = 0`.
    pub d_tilde: DMatrix<f64>,
}

/// Pushes the metric samples forward through `χ`.
pub fn pushforward_metric(metric: &MetricField, chi: &ChiMap) -> Result<Vec<Pushforward>> {
    let n = metric.dim;
    metric
        .samples
        .iter()
        .map(|s| {
            let jet = chi.eval(s.t, &s.x);
            let jac = &jet.jacobian;
            let inv = jac
                .clone()
                .try_inverse()
                .filter(|_| jac.determinant().abs() > 1e-12)
                .ok_or(Error::SingularJacobian { t: s.t })?;
            let g_tilde = jac * &s.g * jac.transpose();
            // c_i = (Dχ⁻¹)_{mk} ∂_m ∂_i χ_k
            let mut c = DVector::zeros(n);
            for (k, h) in jet.hessians.iter().enumerate() {
                for i in 0..n {
                    for m in 0..n {
                        c[i] += inv[(m, k)] * h[(m, i)];
                    }
                }
            }
            let drift_second = -(jac * (&s.g * c));
            let drift = &jet.dt + &drift_second;
            let x2: f64 = s.x.iter().map(|v| v * v).sum();
            let d_tilde = if x2 > 0.0 {
                DVector::from_column_slice(&s.x) * drift.transpose() * (s.t / x2)
            } else {
                DMatrix::zeros(n, n)
            };
            Ok(Pushforward {
                t: s.t,
                x: s.x.clone(),
                g_tilde,
                drift,
                drift_second,
                d_tilde,
            })
        })
        .collect()
}

/// Cell-wise oscillation `max_entry (max − min)` of matrix samples over `A_ij`.
pub fn cell_oscillation<'a>(
    rows: impl Iterator<Item = (f64, &'a [f64], &'a DMatrix<f64>)>,
) -> BTreeMap<(i64, i64), f64> {
    let mut ranges: BTreeMap<(i64, i64), (DMatrix<f64>, DMatrix<f64>)> = BTreeMap::new();
    for (t, x, m) in rows {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let Ok(idx) = locate_radius(t, r) else { continue };
        let entry = ranges.entry((idx.i, idx.j)).or_insert_with(|| (m.clone(), m.clone()));
        entry.0.zip_apply(m, |a, b| *a = a.min(b));
        entry.1.zip_apply(m, |a, b| *a = a.max(b));
    }
    ranges
        .into_iter()
        .map(|(k, (lo, hi))| (k, (hi - lo).amax()))
        .collect()
}

/// Sampled constants for a metric and its normalizing coordinate change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricAudit {
    /// `max ‖∂_x χ − I‖₂` over the samples.
    pub jacobian_deviation: f64,
    /// `max |g̃ − I|` over the anchors.
    pub anchor_error: f64,
    /// `max |d̃₂| |x|² / t` for the second-derivative part of `d̃`.
    pub second_order_drift: f64,
    /// `max |t ∂_t χ| / |x|`, the time-derivative part of `d̃` relative to `|x|`.
    pub time_drift: f64,
    /// `Σ` of cell oscillations of `g` and of `g̃`.
    pub alpha_in: f64,
    pub alpha_out: f64,
}

pub fn audit_metric(metric: &MetricField, chi: &ChiMap) -> Result<MetricAudit> {
    let push = pushforward_metric(metric, chi)?;
    let n = metric.dim;
    let id = DMatrix::<f64>::identity(n, n);
    let mut audit = MetricAudit {
        jacobian_deviation: 0.0,
        anchor_error: 0.0,
        second_order_drift: 0.0,
        time_drift: 0.0,
        alpha_in: 0.0,
        alpha_out: 0.0,
    };
    let lattice = chi.lattice();
    let anchors: Vec<(f64, Vec<f64>)> = lattice.anchors().map(|(i, j)| anchor_point(n, i, j)).collect();
    for (s, p) in metric.samples.iter().zip(&push) {
        let jet = chi.eval(s.t, &s.x);
        let dev = (&jet.jacobian - &id).svd(false, false).singular_values.max();
        audit.jacobian_deviation = audit.jacobian_deviation.max(dev);
        if anchors.iter().any(|(t, x)| same_point(*t, x, s)) {
            audit.anchor_error = audit.anchor_error.max((&p.g_tilde - &id).amax());
        }
        let r2: f64 = s.x.iter().map(|v| v * v).sum();
        if r2 > 0.0 {
            let d2 = DVector::from_column_slice(&s.x) * p.drift_second.transpose() * (s.t / r2);
            audit.second_order_drift = audit.second_order_drift.max(d2.amax() * r2 / s.t);
            audit.time_drift = audit.time_drift.max(s.t * jet.dt.amax() / r2.sqrt());
        }
    }
    audit.alpha_in = cell_oscillation(metric.samples.iter().map(|s| (s.t, s.x.as_slice(), &s.g))).values().sum();
    audit.alpha_out = cell_oscillation(push.iter().map(|p| (p.t, p.x.as_slice(), &p.g_tilde))).values().sum();
    Ok(audit)
}

/// Smooth perturbation `g = I + Σ a_ij η_ij S_ij` of the identity, with unit
/// symmetric `S_ij` and amplitudes summing to a prescribed total.
#[derive(Debug, Clone)]
pub struct PerturbedMetric {
    dim: usize,
    partition: LatticePartition,
    bumps: BTreeMap<(i64, i64), DMatrix<f64>>,
}

impl PerturbedMetric {
    /// Random amplitudes on every row but the last, so `g → I` as `(t, x) → 0`.
    pub fn random(dim: usize, lattice: AnchorLattice, total: f64, rng: &mut impl Rng) -> Self {
        let cells: Vec<(i64, i64)> = lattice.anchors().filter(|(i, _)| *i < lattice.i_max).collect();
        let raw: Vec<f64> = cells.iter().map(|_| rng.gen_range(0.0..1.0_f64).powi(3)).collect();
        let sum: f64 = raw.iter().sum::<f64>().max(1e-300);
        let mut bumps = BTreeMap::new();
        for (cell, a) in cells.into_iter().zip(raw) {
            let mut s = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
            s = (&s + s.transpose()) * 0.5;
            let norm = s.amax().max(1e-12_f64);
            bumps.insert(cell, s * (total * a / sum / norm));
        }
        Self {
            dim,
            partition: LatticePartition::new(lattice),
            bumps,
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        let mut g = DMatrix::identity(self.dim, self.dim);
        for (i, j, eta) in self.partition.active(t, x) {
            if let Some(s) = self.bumps.get(&(i, j)) {
                g += s * eta.value;
            }
        }
        g
    }

    /// `Σ a_ij` with `a_ij = max |S_ij entries|`.
    pub fn total(&self) -> f64 {
        self.bumps.values().map(|s| s.amax()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lattice() -> AnchorLattice {
        AnchorLattice::new(1, 4, 3).unwrap()
    }

    fn field(dim: usize, g: impl Fn(f64, &[f64]) -> DMatrix<f64>) -> MetricField {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        MetricField::from_fn(dim, lattice().sample_points(dim, 3, &mut rng), g)
    }

    #[test]
    fn partition_sums_to_one_and_is_one_at_anchors() {
        let part = LatticePartition::new(lattice());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (t, x) in lattice().sample_points(2, 4, &mut rng) {
            let total: f64 = part.active(t, &x).iter().map(|e| e.2.value).sum();
            assert!((total - 1.0).abs() < 1e-14);
        }
        let (t, x) = anchor_point(2, 2, 1);
        let act = part.active(t, &x);
        let hit: Vec<_> = act.iter().filter(|e| e.2.value != 0.0).collect();
        assert_eq!(hit.len(), 1);
        assert_eq!((hit[0].0, hit[0].1), (2, 1));
        assert_eq!(hit[0].2.value, 1.0);
    }

    #[test]
    fn partition_derivatives_match_finite_differences() {
        let part = LatticePartition::new(lattice());
        let (t, x) = (0.0004, vec![0.013, -0.007]);
        let h = 1e-7;
        for (i, j, eta) in part.active(t, &x) {
            let val = |t: f64, x: &[f64]| {
                part.active(t, x).into_iter().find(|e| e.0 == i && e.1 == j).map_or(0.0, |e| e.2.value)
            };
            let dt = (val(t * (1.0 + 1e-6), &x) - val(t * (1.0 - 1e-6), &x)) / (2e-6 * t);
            assert!((dt - eta.dt).abs() <= 1e-5 * (1.0 + eta.dt.abs()), "dt {dt} vs {}", eta.dt);
            for k in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let g = (val(t, &xp) - val(t, &xm)) / (2.0 * h);
                assert!((g - eta.grad[k]).abs() <= 1e-5 * (1.0 + g.abs()));
            }
        }
    }

    #[test]
    fn identity_metric_gives_identity_map() {
        let metric = field(2, |_, _| DMatrix::identity(2, 2));
        let chi = build_chi(&metric, lattice()).unwrap();
        for s in &metric.samples {
            let jet = chi.eval(s.t, &s.x);
            assert_eq!(jet.value.as_slice(), s.x.as_slice());
            assert_eq!(jet.jacobian, DMatrix::identity(2, 2));
            assert!(jet.dt.iter().all(|v| *v == 0.0));
        }
        for p in pushforward_metric(&metric, &chi).unwrap() {
            assert_eq!(p.g_tilde, DMatrix::identity(2, 2));
            assert!(p.d_tilde.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn constant_metric_gives_constant_map() {
        let g = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let metric = field(2, |_, _| g.clone());
        let chi = build_chi(&metric, lattice()).unwrap();
        for s in &metric.samples {
            let jet = chi.eval(s.t, &s.x);
            assert_relative_eq!(jet.value[0], s.x[0] / 2.0, max_relative = 1e-14, epsilon = 1e-300);
            assert_relative_eq!(jet.value[1], s.x[1], max_relative = 1e-14, epsilon = 1e-300);
        }
    }

    #[test]
    fn chi_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pm = PerturbedMetric::random(2, lattice(), 0.3, &mut rng);
        let metric = field(2, |t, x| pm.eval(t, x));
        let chi = build_chi(&metric, lattice()).unwrap();
        let (t, x) = (0.0011, vec![0.02, 0.011]);
        let jet = chi.eval(t, &x);
        let h = 1e-7;
        for k in 0..2 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let (a, b) = (chi.eval(t, &xp), chi.eval(t, &xm));
            for l in 0..2 {
                let fd = (a.value[l] - b.value[l]) / (2.0 * h);
                assert!((fd - jet.jacobian[(l, k)]).abs() < 1e-6);
                for m in 0..2 {
                    let fd2 = (a.jacobian[(l, m)] - b.jacobian[(l, m)]) / (2.0 * h);
                    assert!((fd2 - jet.hessians[l][(k, m)]).abs() < 1e-4 * (1.0 + fd2.abs()));
                }
            }
        }
        let (a, b) = (chi.eval(t * (1.0 + 1e-6), &x), chi.eval(t * (1.0 - 1e-6), &x));
        for l in 0..2 {
            let fd = (a.value[l] - b.value[l]) / (2e-6 * t);
            assert!((fd - jet.dt[l]).abs() < 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn anchors_are_normalized_and_deviation_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let pm = PerturbedMetric::random(2, lattice(), 0.1, &mut rng);
        assert_relative_eq!(pm.total(), 0.1, max_relative = 1e-12);
        let metric = field(2, |t, x| pm.eval(t, x));
        let chi = build_chi(&metric, lattice()).unwrap();
        let audit = audit_metric(&metric, &chi).unwrap();
        assert!(audit.anchor_error < 1e-12, "{audit:?}");
        assert!(audit.jacobian_deviation < 0.5, "{audit:?}");
        assert!(audit.alpha_out <= 3.0 * audit.alpha_in + 1e-12, "{audit:?}");
    }

    #[test]
    fn missing_anchor_and_indefinite_metric_are_errors() {
        let empty = MetricField { dim: 2, samples: vec![] };
        assert!(matches!(build_chi(&empty, lattice()), Err(Error::GridMismatch(_))));
        let bad = field(2, |_, _| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        assert!(matches!(build_chi(&bad, lattice()), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let metric = field(2, |t, x| DMatrix::from_row_slice(2, 2, &[1.0 + t, x[0], x[0], 1.0]));
        let mut buf = Vec::new();
        metric.write_csv(&mut buf).unwrap();
        let back = MetricField::read_csv(buf.as_slice(), 2).unwrap();
        assert_eq!(back, metric);
        assert!(MetricField::read_csv("t,x1\n1,2\n".as_bytes(), 2).is_err());
    }

    #[test]
    fn normalization_sends_reference_to_identity() {
        let g0 = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let metric = MetricField::from_fn(2, vec![(1.0, vec![0.0, 0.0])], |_, _| g0.clone());
        let n = metric.normalized(&g0).unwrap();
        assert!((&n.samples[0].g - DMatrix::<f64>::identity(2, 2)).amax() < 1e-14);
    }
}
