//! Subcommand bodies. Each writes its artifacts into the output directory
//! and returns whether every check it ran passed.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use carleman_core::hermite::{spectrum_distance, HermiteBasis, TimeGrid};
use carleman_core::partition::{enumerate_a_tau, enumerate_b_tau, PartitionWindow};
use carleman_core::regularize::{finalize, AlphaTable, EpsilonTable};
use carleman_core::transform::{conjugation_residual, from_hermite, observed_order, to_hermite, HeatSample, HermiteGrid};
use carleman_core::verifier::{
    check_bell, check_commutator, check_flat_carleman, check_gap_inequality, check_weight_envelope, field_ensemble,
    series_ensemble, write_reports, FormResolution, RatioReport,
};
use carleman_core::weights::{audit_h, build_h, build_phi, build_psi, AuxWeights};
use carleman_core::DyadicIndex;
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Collects artifact names for the manifest.
struct Artifacts<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl<'a> Artifacts<'a> {
    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.names.push(name.to_string());
        Ok(())
    }
}

fn window(cfg: &RunConfig) -> Result<PartitionWindow<f64>> {
    let probe = PartitionWindow::new(cfg.tau, 0)?;
    Ok(PartitionWindow::new(cfg.tau, cfg.imax.unwrap_or(probe.i_min + 4))?)
}

fn read_cells(path: &Path) -> Result<BTreeMap<DyadicIndex, f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut out = BTreeMap::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            bail!("{}: row {} has {} fields, expected i,j,value", path.display(), n + 1, rec.len());
        }
        let i: i64 = rec[0].parse().with_context(|| format!("{}: row {} field i", path.display(), n + 1))?;
        let j: i64 = rec[1].parse().with_context(|| format!("{}: row {} field j", path.display(), n + 1))?;
        let v: f64 = rec[2].parse().with_context(|| format!("{}: row {} field value", path.display(), n + 1))?;
        out.insert(DyadicIndex::new(i, j), v);
    }
    Ok(out)
}

fn alpha_table(cfg: &RunConfig) -> Result<AlphaTable<f64>> {
    let w = window(cfg)?;
    match &cfg.alpha_file {
        Some(path) => {
            let cells = read_cells(path)?;
            let mut a = AlphaTable::from_fn(w, |idx| cells.get(&idx).copied().unwrap_or(0.0))?;
            a.normalize();
            Ok(a)
        }
        None => Ok(AlphaTable::random_spikes(w, &mut ChaCha8Rng::seed_from_u64(cfg.seed))),
    }
}

fn eps_table(cfg: &RunConfig) -> Result<EpsilonTable<f64>> {
    match &cfg.eps_file {
        Some(path) => {
            let cells = read_cells(path)?;
            let i_max = cells.keys().map(|k| k.i).max().ok_or_else(|| anyhow!("{} is empty", path.display()))?;
            let w = PartitionWindow::new(cfg.tau, i_max)?;
            let mut missing = None;
            let eps = EpsilonTable::from_fn(w, |idx| match cells.get(&idx) {
                Some(v) => *v,
                None => {
                    missing.get_or_insert(idx);
                    1.0
                }
            })?;
            if let Some(idx) = missing {
                bail!("{} has no value for cell {idx}", path.display());
            }
            Ok(eps)
        }
        None => Ok(finalize(&alpha_table(cfg)?)?),
    }
}

fn table_rows<'t>(it: impl Iterator<Item = (DyadicIndex, f64)> + 't) -> impl Iterator<Item = Vec<String>> + 't {
    it.map(|(idx, v)| vec![idx.i.to_string(), idx.j.to_string(), num(v)])
}

fn partition(cfg: &RunConfig, out: &mut Artifacts) -> Result<bool> {
    let w = window(cfg)?;
    let a = enumerate_a_tau(&w);
    out.csv("a_tau.csv", &["i", "j"], a.iter().map(|c| vec![c.i.to_string(), c.j.to_string()]))?;
    let b = enumerate_b_tau(&w);
    out.csv(
        "b_tau.csv",
        &["i", "j", "kind", "t_lo", "t_hi", "r_lo", "r_hi"],
        b.iter().map(|c| {
            vec![
                c.index.i.to_string(),
                c.index.j.to_string(),
                c.kind.as_str().to_string(),
                num(c.t_lo),
                num(c.t_hi),
                num(c.r_lo),
                num(c.r_hi),
            ]
        }),
    )?;
    println!("partition: {} cells in A(tau), {} in B(tau), rows {}..={}", a.len(), b.len(), w.i_min, w.i_max);
    Ok(true)
}

fn regularize(cfg: &RunConfig, out: &mut Artifacts) -> Result<bool> {
    let alpha = alpha_table(cfg)?;
    let eps = finalize(&alpha)?;
    out.csv("alpha.csv", &["i", "j", "value"], table_rows(alpha.indices().map(|i| (i, alpha.get(i).unwrap()))))?;
    out.csv("epsilon.csv", &["i", "j", "value"], table_rows(eps.iter()))?;
    out.csv(
        "epsilon_rows.csv",
        &["i", "row_sum", "threshold", "guess"],
        eps.window().rows().map(|i| {
            vec![
                i.to_string(),
                num(eps.row_sum(i).unwrap()),
                eps.threshold(i).unwrap().to_string(),
                num(eps.guess(i).unwrap()),
            ]
        }),
    )?;
    let audit = eps.audit(&alpha);
    out.text("epsilon_audit.txt", &format!("{audit:#?}\n"))?;
    println!("regularize: passes = {}", audit.passes());
    Ok(audit.passes())
}

fn weights(cfg: &RunConfig, out: &mut Artifacts) -> Result<bool> {
    let eps = eps_table(cfg)?;
    let h = build_h(&eps)?;
    let audit = audit_h(&h, &eps, 1000);
    let psi = build_psi(h.clone(), build_phi(&eps), cfg.delta2)?;
    let aux = AuxWeights::new(&eps);
    let (a, b) = h.domain();
    let reach = 3.0 * cfg.tau.sqrt();
    let mut rows = Vec::new();
    for k in 0..=200 {
        let s = a + (b - a) * k as f64 / 200.0;
        let [hv, d1, d2, _] = h.eval(s);
        for m in 0..=60 {
            let r = reach * m as f64 / 60.0;
            let phi = psi.phi.value(s, &[r]);
            let x = aux.eval(s, r);
            rows.push(vec![
                num(s),
                num(r),
                num(hv),
                num(d1),
                num(d2),
                num(phi),
                num(psi.value(s, &[r])),
                num(x.a),
                num(x.b),
                num(x.b_perp),
            ]);
        }
    }
    out.csv("weights.csv", &["s", "y", "h", "dh", "d2h", "phi", "psi", "a", "b", "b_perp"], rows)?;
    out.text("h_audit.txt", &format!("rescale = {}\n{audit:#?}\n", num(h.rescale())))?;
    let ok = audit.min_slope_over_tau >= 1.0 && audit.max_slope_over_tau <= 2.0 && audit.min_gap > 0.25 && audit.min_second >= 0.0;
    println!("weights: h'/tau in [{:.4}, {:.4}], min gap {:.4}", audit.min_slope_over_tau, audit.max_slope_over_tau, audit.min_gap);
    Ok(ok)
}

fn hermite(cfg: &RunConfig, check: bool, out: &mut Artifacts) -> Result<bool> {
    let basis = HermiteBasis::<f64>::new(cfg.dim, cfg.lambda_max)?;
    out.csv(
        "hermite_blocks.csv",
        &["lambda", "multiplicity"],
        basis.blocks().iter().zip(basis.eigenvalues()).map(|(b, l)| vec![l.to_string(), b.len().to_string()]),
    )?;
    if !check {
        return Ok(true);
    }
    let ortho = basis.orthonormality_error();
    let eigen = basis.eigen_residual();
    out.csv("hermite_checks.csv", &["check", "value", "tolerance"], [
        vec!["orthonormality".into(), num(ortho), num(1e-10)],
        vec!["eigen_relation".into(), num(eigen), num(1e-8)],
    ])?;
    println!("hermite: orthonormality {ortho:.3e}, eigen relation {eigen:.3e}");
    Ok(ortho < 1e-10 && eigen < 1e-8)
}

fn transform(cfg: &RunConfig, out: &mut Artifacts) -> Result<bool> {
    let basis = HermiteBasis::<f64>::new(1, cfg.lambda_max.max(61) | 1)?;
    let s: Vec<f64> = (0..41).map(|k| 0.02 + 0.01 * k as f64).collect();
    let grid = HermiteGrid::from_basis(&basis, s);
    let u = HeatSample::on_image(&grid, |t, x| (2.0 * t).cos() * (-x[0] * x[0]).exp() + t * x[0]);
    let back = from_hermite(&to_hermite(&grid, &u)?);
    let round = back
        .values
        .iter()
        .zip(&u.values)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1e-300))
        .fold(0.0, f64::max);

    // u = b(t) e^{-x²/8t} with a Gaussian profile b in time
    let b = |t: f64| (-(t - 0.6).powi(2) / 0.01).exp();
    let db = |t: f64| -2.0 * (t - 0.6) / 0.01 * b(t);
    let heat = |t: f64, x: &[f64]| b(t) * (-x[0] * x[0] / (8.0 * t)).exp();
    let source = |t: f64, x: &[f64]| {
        let x2 = x[0] * x[0];
        (db(t) + b(t) * (3.0 * x2 / (16.0 * t * t) - 0.25 / t)) * (-x2 / (8.0 * t)).exp()
    };
    let (s0, s1) = (-(0.95f64).ln() / 4.0, -(0.3f64).ln() / 4.0);
    let mut rows = Vec::new();
    let mut prev: Option<f64> = None;
    let mut worst_order = f64::INFINITY;
    for len in [41usize, 81, 161] {
        let r = conjugation_residual(&basis, TimeGrid::new(s0, s1, len)?, heat, source)?;
        let order = prev.map(|p| observed_order(p, r.residual, 2.0));
        if let Some(o) = order {
            worst_order = worst_order.min(o);
        }
        rows.push(vec![len.to_string(), num(r.residual), num(r.relative), order.map(num).unwrap_or_default()]);
        prev = Some(r.residual);
    }
    out.csv("conjugation.csv", &["time_points", "residual", "relative", "observed_order"], rows)?;
    out.text("round_trip.txt", &format!("max_relative_error = {}\n", num(round)))?;
    println!("transform: round trip {round:.3e}, worst observed order {worst_order:.3}");
    Ok(round < 1e-12 && worst_order >= 3.5)
}

fn verify(cfg: &RunConfig, out: &mut Artifacts) -> Result<bool> {
    let wants = |s: &str| cfg.suite == s || cfg.suite == "all";
    let mut reports: Vec<RatioReport> = Vec::new();
    if wants("gap") || wants("flat") {
        let basis = HermiteBasis::<f64>::new(cfg.dim, cfg.lambda_max)?;
        let grid = TimeGrid::new(-4.0, 4.0, 801)?;
        let ens = series_ensemble(&basis, grid, cfg.lambda_max, cfg.ensemble, cfg.seed);
        for &tau in &cfg.tau_list {
            let gap = spectrum_distance(cfg.dim, Complex::new(4.0 * tau, 0.0));
            if wants("gap") {
                reports.push(check_gap_inequality(tau, gap, &ens)?);
            }
            if wants("flat") {
                reports.push(check_flat_carleman(&basis, tau, gap, &ens)?);
            }
        }
    }
    if wants("bell") || wants("commutator") {
        let eps = eps_table(cfg)?;
        let h = build_h(&eps)?;
        if wants("bell") {
            let (a, b) = h.domain();
            let top = ((2.0 * cfg.tau).ceil() as usize + 21) | 1;
            let basis = HermiteBasis::<f64>::new(1, top)?;
            let ens = series_ensemble(&basis, TimeGrid::new(a, b, 1001)?, top, cfg.ensemble.min(10), cfg.seed);
            reports.push(check_bell(&h, &ens)?);
        }
        if wants("commutator") {
            let psi = build_psi(h, build_phi(&eps), cfg.delta2)?;
            let aux = AuxWeights::new(&eps);
            let dim = cfg.dim.min(2);
            let ens = field_ensemble(dim, 3.0 * cfg.tau.sqrt(), psi.h.domain(), cfg.ensemble.min(20), cfg.seed);
            reports.push(check_commutator(&psi, &aux, &ens, FormResolution::default())?);
        }
    }
    for r in &reports {
        println!("{}", r.summary());
    }
    // runtimes go to their own file so the report CSV is reproducible
    let timings: String = reports.iter().map(|r| format!("{} = {:.6}\n", r.id, r.runtime)).collect();
    let stable: Vec<RatioReport> = reports.iter().cloned().map(|mut r| {
        r.runtime = 0.0;
        r
    }).collect();
    let path = out.dir.join("reports.csv");
    write_reports(File::create(&path)?, &stable)?;
    out.names.push("reports.csv".into());
    fs::write(out.dir.join("timings.txt"), timings)?;
    Ok(reports.iter().all(|r| r.pass))
}

fn report(cfg: &RunConfig, out: &mut Artifacts) -> Result<bool> {
    // boundary |x| = (τ t)^{1/2} of the cut parabola for t ≤ 1/τ
    let tau = cfg.tau;
    let outline = (0..=200).map(|k| {
        let t = k as f64 / 200.0 / tau;
        vec![num(t), num((tau * t).sqrt()), num(-(tau * t).sqrt())]
    });
    out.csv("cut_parabola.csv", &["t", "x_upper", "x_lower"], outline)?;

    let eps = eps_table(cfg)?;
    let h = build_h(&eps)?;
    let (a, b) = h.domain();
    out.csv(
        "h_profile.csv",
        &["s", "h", "dh", "d2h", "d3h"],
        (0..=1000).map(|k| {
            let s = a + (b - a) * k as f64 / 1000.0;
            h.eval(s).iter().fold(vec![num(s)], |mut row, v| {
                row.push(num(*v));
                row
            })
        }),
    )?;
    let psi = build_psi(h, build_phi(&eps), cfg.delta2)?;
    let env = check_weight_envelope(&psi, &[1e-2, 1e-3, 1e-4]);
    out.text("envelope.txt", &(env.lines().join("\n") + "\n"))?;
    for line in env.lines() {
        println!("envelope: {line}");
    }
    Ok(true)
}

/// The config echo is live; everything else is commented so
/// `carleman <command> --config manifest.txt` repeats the run.
fn manifest(cfg: &RunConfig, command: &str, artifacts: &[String], ok: bool) -> String {
    let mut s = format!("# command = {command}\n# version = {}\n", env!("CARGO_PKG_VERSION"));
    s.push_str(&cfg.echo());
    s.push_str(&format!("# artifacts = {}\n# pass = {ok}\n", artifacts.join(",")));
    s
}

/// Runs `command` and writes `manifest.txt` next to its artifacts.
pub fn run(command: &str, cfg: &RunConfig, check: bool) -> Result<bool> {
    fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))?;
    let mut out = Artifacts { dir: &cfg.output, names: Vec::new() };
    let ok = match command {
        "partition" => partition(cfg, &mut out)?,
        "regularize" => regularize(cfg, &mut out)?,
        "weights" => weights(cfg, &mut out)?,
        "hermite" => hermite(cfg, check, &mut out)?,
        "transform" => transform(cfg, &mut out)?,
        "verify" => verify(cfg, &mut out)?,
        "report" => report(cfg, &mut out)?,
        other => bail!("unknown command `{other}`"),
    };
    let mut f = File::create(cfg.output.join("manifest.txt"))?;
    f.write_all(manifest(cfg, command, &out.names, ok).as_bytes())?;
    Ok(ok)
}
