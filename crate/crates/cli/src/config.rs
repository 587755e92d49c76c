//! Run configuration: defaults, then a flat `key = value` file, then flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tau: f64,
    pub dim: usize,
    pub lambda_max: usize,
    /// Last time level of the partition window; `None` uses four rows past the first.
    pub imax: Option<i64>,
    pub delta1: f64,
    pub delta2: f64,
    pub ensemble: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub suite: String,
    pub tau_list: Vec<f64>,
    pub eps_file: Option<PathBuf>,
    pub alpha_file: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tau: 4f64.exp(),
            dim: 1,
            lambda_max: 31,
            imax: None,
            delta1: 0.1,
            delta2: 0.01,
            ensemble: 50,
            seed: 1,
            output: PathBuf::from("out"),
            suite: "all".into(),
            tau_list: vec![0.5, 1.0, 1.5],
            eps_file: None,
            alpha_file: None,
        }
    }
}

pub const SUITES: [&str; 5] = ["gap", "flat", "bell", "commutator", "all"];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow!("config key `{key}`: cannot parse `{value}`: {e}"))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "tau" => self.tau = parse(key, value)?,
            "dim" => self.dim = parse(key, value)?,
            "lambda_max" => self.lambda_max = parse(key, value)?,
            "imax" => self.imax = Some(parse(key, value)?),
            "delta1" => self.delta1 = parse(key, value)?,
            "delta2" => self.delta2 = parse(key, value)?,
            "ensemble" => self.ensemble = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "output" => self.output = PathBuf::from(value),
            "suite" => self.suite = value.to_string(),
            "tau_list" => self.tau_list = parse_list(key, value)?,
            "eps_file" => self.eps_file = Some(PathBuf::from(value)),
            "alpha_file" => self.alpha_file = Some(PathBuf::from(value)),
            _ => bail!("unknown config key `{key}`"),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected `key = value`, got `{raw}`", n + 1))?;
            self.apply(key.trim(), value.trim()).with_context(|| format!("config line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        self.apply_text(&text)
    }

    /// Range checks, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            bail!("tau must be positive, got {}", self.tau);
        }
        if !(1..=3).contains(&self.dim) {
            bail!("dim must be 1, 2 or 3, got {}", self.dim);
        }
        if self.lambda_max < self.dim {
            bail!("lambda_max must be at least dim = {}, got {}", self.dim, self.lambda_max);
        }
        if !(self.delta1 > 0.0 && self.delta1 < 1.0) {
            bail!("delta1 must lie in (0, 1), got {}", self.delta1);
        }
        if !(self.delta2 >= 0.0 && self.delta2 < 1.0) {
            bail!("delta2 must lie in [0, 1), got {}", self.delta2);
        }
        if self.ensemble == 0 {
            bail!("ensemble must be at least 1");
        }
        if !SUITES.contains(&self.suite.as_str()) {
            bail!("suite must be one of {SUITES:?}, got `{}`", self.suite);
        }
        if self.tau_list.is_empty() || self.tau_list.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            bail!("tau_list must be a nonempty list of positive numbers, got {:?}", self.tau_list);
        }
        Ok(())
    }

    /// The configuration in the same `key = value` format it is read from.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tau = {:.16e}", self.tau);
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "lambda_max = {}", self.lambda_max);
        if let Some(i) = self.imax {
            let _ = writeln!(s, "imax = {i}");
        }
        let _ = writeln!(s, "delta1 = {:.16e}", self.delta1);
        let _ = writeln!(s, "delta2 = {:.16e}", self.delta2);
        let _ = writeln!(s, "ensemble = {}", self.ensemble);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "output = {}", self.output.display());
        let _ = writeln!(s, "suite = {}", self.suite);
        let list: Vec<String> = self.tau_list.iter().map(|t| format!("{t:.16e}")).collect();
        let _ = writeln!(s, "tau_list = {}", list.join(","));
        if let Some(p) = &self.eps_file {
            let _ = writeln!(s, "eps_file = {}", p.display());
        }
        if let Some(p) = &self.alpha_file {
            let _ = writeln!(s, "alpha_file = {}", p.display());
        }
        s
    }
}
