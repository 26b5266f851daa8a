//! Experiment reports and their JSON / CSV encodings.

use std::io::Write;
use std::path::Path;

use gsd_tail::asymptotics::Evaluation;
use gsd_tail::{McEstimate, TailAsymptotics};
use serde::{Deserialize, Serialize};

/// Output encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// CSV header, one column per [`ReportRow`] field that is written.
pub const CSV_HEADER: [&str; 6] = ["u", "mc", "mc_se", "asym", "ratio", "log_ratio"];

/// One point of an MC-versus-asymptotics comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub u: f64,
    pub mc: f64,
    pub mc_se: f64,
    pub hits: u64,
    pub asym: f64,
    pub asym_log: f64,
    /// `mc / asym`, formed as `exp(ln mc - ln asym)`; absent without hits.
    pub ratio: Option<f64>,
    pub log_ratio: Option<f64>,
    pub in_tail_region: bool,
}

impl ReportRow {
    pub fn new(est: &McEstimate, eval: &Evaluation) -> Self {
        let log_ratio = (est.p_hat > 0.0).then(|| est.p_hat.ln() - eval.log_value);
        Self {
            u: eval.u,
            mc: est.p_hat,
            mc_se: est.std_err,
            hits: est.hits,
            asym: eval.value,
            asym_log: eval.log_value,
            ratio: log_ratio.map(f64::exp),
            log_ratio,
            in_tail_region: eval.in_tail_region,
        }
    }

    /// Relative standard error of the MC estimate.
    pub fn relative_se(&self) -> f64 {
        if self.mc > 0.0 {
            self.mc_se / self.mc
        } else {
            f64::INFINITY
        }
    }
}

/// A named pass/fail check with the measured value and its tolerance.
/// A non-finite measurement is stored as `None` and fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl Check {
    /// Passes when `value ≤ tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value <= tolerance,
            value: value.is_finite().then_some(value),
            tolerance: Some(tolerance),
            detail: detail.into(),
        }
    }

    /// Relative deviation `|got/want - 1| ≤ tolerance`.
    pub fn relative(name: &str, got: f64, want: f64, tolerance: f64) -> Self {
        let dev = (got / want - 1.0).abs();
        Self::at_most(name, dev, tolerance, format!("got {got:e}, expected {want:e}"))
    }

    pub fn flag(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value: None,
            tolerance: None,
            detail: detail.into(),
        }
    }
}

/// `P(X₂ > ρu + x√(u/w(u)) | X₁ > u)` against its limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalReport {
    pub u: f64,
    /// `P(X₁ > u)` at the chosen `u`.
    pub marginal_tail: f64,
    pub hits: u64,
    pub n_samples: u64,
    pub points: Vec<ConditionalPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalPoint {
    pub x: f64,
    pub estimate: f64,
    pub std_err: f64,
    pub limit: f64,
    pub abs_deviation: f64,
}

/// `n·P(X₁ > b_{n1}, X₂ > b_{n2})` with empirical marginal quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub n_pilot: u64,
    pub n_samples: u64,
    pub points: Vec<IndependencePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependencePoint {
    pub n: f64,
    pub b1: f64,
    pub b2: f64,
    pub p_hat: f64,
    pub std_err: f64,
    pub n_times_p: f64,
}

/// A self-contained experiment record. `inputs` re-runs the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub inputs: serde_json::Value,
    pub model: serde_json::Value,
    pub b: Vec<f64>,
    pub asymptotics: TailAsymptotics,
    /// The other branch, when both apply.
    pub alternative: Option<TailAsymptotics>,
    pub rows: Vec<ReportRow>,
    pub checks: Vec<Check>,
    pub conditional: Option<ConditionalReport>,
    pub independence: Option<IndependenceReport>,
}

impl ExperimentReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn csv_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.to_string()
    }
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(csv_float).unwrap_or_default()
}

/// Encode a report. JSON is pretty-printed with a trailing newline; CSV has
/// one row per `u`.
pub fn encode(report: &ExperimentReport, format: Format) -> anyhow::Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER)?;
            for r in &report.rows {
                w.write_record([
                    csv_float(r.u),
                    csv_float(r.mc),
                    csv_float(r.mc_se),
                    csv_float(r.asym),
                    csv_opt(r.ratio),
                    csv_opt(r.log_ratio),
                ])?;
            }
            Ok(String::from_utf8(w.into_inner()?)?)
        }
    }
}

/// Write to `path`, or to stdout when `path` is `None`.
pub fn write_output(text: &str, path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn report_emit(report: &ExperimentReport, format: Format, path: Option<&Path>) -> anyhow::Result<()> {
    write_output(&encode(report, format)?, path)
}
