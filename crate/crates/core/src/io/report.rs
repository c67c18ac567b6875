use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::config::{OutcomeKind, ReportFormat};
use super::ingest::radians_to_minutes;
use crate::error::{Error, Result};
use crate::estimators::WeightScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Treated,
    Control,
}

impl Arm {
    pub fn label(self) -> &'static str {
        match self {
            Arm::Treated => "treated",
            Arm::Control => "control",
        }
    }
}

/// Resultant vector of one counterfactual arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmVector {
    pub scheme: WeightScheme,
    pub arm: Arm,
    pub alpha: f64,
    pub beta: f64,
    /// Mean direction in `[0, 2π)`.
    pub mu: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitWeight {
    pub scheme: WeightScheme,
    pub arm: Arm,
    pub angle: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub scheme: WeightScheme,
    pub tau: f64,
    pub se_tau: f64,
    pub tau_ci: [f64; 2],
    /// `τ̂` in clock minutes, same sign as the radian value. Clock outcomes only.
    pub tau_minutes: Option<f64>,
    pub tau_ci_minutes: Option<[f64; 2]>,
    pub xi: f64,
    pub se_xi: f64,
    pub xi_ci: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensitySummary {
    pub covariates: Vec<String>,
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub max_score_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub outcome_kind: OutcomeKind,
    pub level: f64,
    pub n_total: usize,
    pub n_used: usize,
    pub n_dropped: usize,
    pub dropped: BTreeMap<String, usize>,
    pub n_treated: usize,
    pub n_control: usize,
    pub propensity: PropensitySummary,
    pub results: Vec<SchemeResult>,
    pub vectors: Vec<ArmVector>,
    #[serde(skip)]
    pub units: Vec<UnitWeight>,
}

impl SchemeResult {
    pub(crate) fn with_minutes(mut self, kind: OutcomeKind) -> Self {
        if kind == OutcomeKind::Clock24 {
            self.tau_minutes = Some(radians_to_minutes(self.tau));
            self.tau_ci_minutes = Some(self.tau_ci.map(radians_to_minutes));
        }
        self
    }
}

/// One line of the CSV report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scheme: WeightScheme,
    pub estimand: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub minutes: Option<f64>,
    pub n_used: usize,
}

impl AnalysisReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut out = Vec::with_capacity(2 * self.results.len());
        for r in &self.results {
            out.push(ReportRow {
                scheme: r.scheme,
                estimand: "tau".into(),
                estimate: r.tau,
                se: r.se_tau,
                ci_lower: r.tau_ci[0],
                ci_upper: r.tau_ci[1],
                minutes: r.tau_minutes,
                n_used: self.n_used,
            });
            out.push(ReportRow {
                scheme: r.scheme,
                estimand: "xi".into(),
                estimate: r.xi,
                se: r.se_xi,
                ci_lower: r.xi_ci[0],
                ci_upper: r.xi_ci[1],
                minutes: None,
                n_used: self.n_used,
            });
        }
        out
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(format!("writing csv: {e}"))
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io {
        path: "<output>".into(),
        source: e,
    }
}

pub fn emit_report<W: Write>(report: &AnalysisReport, format: ReportFormat, mut out: W) -> Result<()> {
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, report)
                .map_err(|e| Error::Data(format!("writing json: {e}")))?;
            writeln!(out).map_err(io_err)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for row in report.rows() {
                w.serialize(row).map_err(csv_err)?;
            }
            w.flush().map_err(io_err)
        }
        ReportFormat::Text => write_text(report, out).map_err(io_err),
    }
}

fn write_text<W: Write>(r: &AnalysisReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "Circular IPW analysis")?;
    writeln!(
        out,
        "rows: {} total, {} used, {} dropped",
        r.n_total, r.n_used, r.n_dropped
    )?;
    for (reason, count) in &r.dropped {
        writeln!(out, "  dropped ({reason}): {count}")?;
    }
    writeln!(out, "arms: {} treated, {} control", r.n_treated, r.n_control)?;
    writeln!(
        out,
        "propensity: {} iterations, max |score| {:.3e}",
        r.propensity.iterations, r.propensity.max_score_norm
    )?;
    let names = std::iter::once("(intercept)").chain(r.propensity.covariates.iter().map(String::as_str));
    for (name, c) in names.zip(&r.propensity.coefficients) {
        writeln!(out, "  {name:<20} {c:>10.3}")?;
    }
    let pct = r.level * 100.0;
    for s in &r.results {
        writeln!(out)?;
        writeln!(out, "[{}]", s.scheme)?;
        write!(
            out,
            "  tau = {:.3} rad (se {:.3}, {pct}% CI [{:.3}, {:.3}])",
            s.tau, s.se_tau, s.tau_ci[0], s.tau_ci[1]
        )?;
        if let (Some(m), Some(ci)) = (s.tau_minutes, s.tau_ci_minutes) {
            write!(out, " = {m:.3} min [{:.3}, {:.3}]", ci[0], ci[1])?;
        }
        writeln!(out)?;
        writeln!(
            out,
            "  xi  = {:.3} (se {:.3}, {pct}% CI [{:.3}, {:.3}])",
            s.xi, s.se_xi, s.xi_ci[0], s.xi_ci[1]
        )?;
        for v in r.vectors.iter().filter(|v| v.scheme == s.scheme) {
            writeln!(
                out,
                "  {:<8} alpha {:.3}  beta {:.3}  mu {:.3}  rho {:.3}",
                v.arm.label(),
                v.alpha,
                v.beta,
                v.mu,
                v.rho
            )?;
        }
    }
    Ok(())
}

/// Reads back rows written by `emit_report` in CSV format.
pub fn parse_report_csv<R: Read>(source: R) -> Result<Vec<ReportRow>> {
    csv::Reader::from_reader(source)
        .deserialize()
        .map(|r| r.map_err(|e| Error::Data(format!("report csv: {e}"))))
        .collect()
}

/// Writes the per-arm vectors CSV and the per-unit weights CSV.
pub fn emit_vectors<V: Write, U: Write>(report: &AnalysisReport, vectors: V, units: U) -> Result<()> {
    let mut w = csv::Writer::from_writer(vectors);
    for v in &report.vectors {
        w.serialize(v).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)?;
    let mut w = csv::Writer::from_writer(units);
    for u in &report.units {
        w.serialize(u).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}
