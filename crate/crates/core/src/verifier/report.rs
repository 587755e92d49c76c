//! Outcome of one numerical inequality check.

use std::io::Write;
use std::time::Instant;

use crate::error::{Error, Result};

/// Which side of the bound the ratios must stay on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// `min ratio ≥ bound·(1 − tol)`.
    AtLeast,
    /// `max ratio ≤ bound·(1 + tol)`.
    AtMost,
    /// `min ratio > 0`; the bound is only recorded.
    Positive,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::AtLeast => "at_least",
            BoundKind::AtMost => "at_most",
            BoundKind::Positive => "positive",
        }
    }
}

/// Ratios achieved over an ensemble against a stated bound.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    pub id: String,
    pub ensemble: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub bound: f64,
    pub tol: f64,
    pub kind: BoundKind,
    /// Side conditions that must also hold, as `(name, ok)`.
    pub conditions: Vec<(String, bool)>,
    /// Recorded quantities that are reported but not asserted.
    pub extras: Vec<(String, f64)>,
    pub pass: bool,
    pub runtime: f64,
}

impl RatioReport {
    /// Report over `ratios`; `pass` is derived from the bound and the
    /// conditions added later through [`require`](Self::require).
    pub fn new(id: impl Into<String>, kind: BoundKind, bound: f64, tol: f64, ratios: &[f64]) -> Self {
        let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut out = Self {
            id: id.into(),
            ensemble: ratios.len(),
            min_ratio,
            max_ratio,
            bound,
            tol,
            kind,
            conditions: Vec::new(),
            extras: Vec::new(),
            pass: false,
            runtime: 0.0,
        };
        out.pass = out.evaluate();
        out
    }

    fn bound_holds(&self) -> bool {
        if self.ensemble == 0 || self.min_ratio.is_nan() || self.max_ratio.is_nan() {
            return false;
        }
        match self.kind {
            BoundKind::AtLeast => self.min_ratio >= self.bound * (1.0 - self.tol),
            BoundKind::AtMost => self.max_ratio <= self.bound * (1.0 + self.tol),
            BoundKind::Positive => self.min_ratio > 0.0,
        }
    }

    fn evaluate(&self) -> bool {
        self.bound_holds() && self.conditions.iter().all(|(_, ok)| *ok)
    }

    pub fn require(mut self, name: impl Into<String>, ok: bool) -> Self {
        self.conditions.push((name.into(), ok));
        self.pass = self.evaluate();
        self
    }

    pub fn record(mut self, name: impl Into<String>, value: f64) -> Self {
        self.extras.push((name.into(), value));
        self
    }

    pub fn timed(mut self, start: Instant) -> Self {
        self.runtime = start.elapsed().as_secs_f64();
        self
    }

    pub fn extra(&self, name: &str) -> Option<f64> {
        self.extras.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    /// One human-readable line.
    pub fn summary(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let mut line = format!(
            "{verdict} {} n={} min={:.6e} max={:.6e} {} {:.6e} (tol {:.1e}) {:.3}s",
            self.id,
            self.ensemble,
            self.min_ratio,
            self.max_ratio,
            self.kind.as_str(),
            self.bound,
            self.tol,
            self.runtime
        );
        for (name, ok) in &self.conditions {
            line.push_str(&format!(" {name}={}", if *ok { "ok" } else { "violated" }));
        }
        for (name, v) in &self.extras {
            line.push_str(&format!(" {name}={v:.6e}"));
        }
        line
    }
}

/// Column names of [`write_reports`].
pub const REPORT_HEADER: [&str; 11] =
    ["id", "ensemble", "min_ratio", "max_ratio", "kind", "bound", "tol", "pass", "runtime", "conditions", "extras"];

/// Reports as CSV with 17 significant digits; conditions and extras are
/// packed as `name=value` lists separated by `;`.
pub fn write_reports<W: Write>(out: W, reports: &[RatioReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(REPORT_HEADER).map_err(io)?;
    for r in reports {
        let conditions: Vec<String> = r.conditions.iter().map(|(k, ok)| format!("{k}={ok}")).collect();
        let extras: Vec<String> = r.extras.iter().map(|(k, v)| format!("{k}={v:.16e}")).collect();
        w.write_record([
            r.id.clone(),
            r.ensemble.to_string(),
            format!("{:.16e}", r.min_ratio),
            format!("{:.16e}", r.max_ratio),
            r.kind.as_str().to_string(),
            format!("{:.16e}", r.bound),
            format!("{:.16e}", r.tol),
            r.pass.to_string(),
            format!("{:.16e}", r.runtime),
            conditions.join(";"),
            extras.join(";"),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}
