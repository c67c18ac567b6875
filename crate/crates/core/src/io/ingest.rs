use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::f64::consts::TAU;
use std::fs::File;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::config::{AnalysisConfig, CovariateKind, OutcomeKind};
use crate::circular::Angle;
use crate::error::{Error, Result};
use crate::estimators::{CausalDataset, Unit};

const MINUTES_PER_DAY: f64 = 1440.0;

/// `2π · (60·HH + MM) / 1440` for a strict `HH:MM` string.
pub fn time_to_radians(hhmm: &str) -> Result<Angle> {
    let bad = || Error::Data(format!("malformed clock time '{hhmm}', expected HH:MM"));
    let (h, m) = hhmm.trim().split_once(':').ok_or_else(bad)?;
    let digits = |s: &str| !s.is_empty() && s.len() <= 2 && s.bytes().all(|b| b.is_ascii_digit());
    if !digits(h) || m.len() != 2 || !digits(m) {
        return Err(bad());
    }
    let (h, m): (u32, u32) = (h.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?);
    if h > 23 || m > 59 {
        return Err(bad());
    }
    Angle::new(TAU * f64::from(h * 60 + m) / MINUTES_PER_DAY)
}

/// Converts an angular difference to clock minutes, keeping its sign.
pub fn radians_to_minutes(radians: f64) -> f64 {
    radians * MINUTES_PER_DAY / TAU
}

pub fn parse_outcome(text: &str, kind: OutcomeKind) -> Result<Angle> {
    match kind {
        OutcomeKind::Clock24 => time_to_radians(text),
        OutcomeKind::Radians | OutcomeKind::Degrees => {
            let v: f64 = text
                .trim()
                .parse()
                .map_err(|_| Error::Data(format!("'{text}' is not a number")))?;
            let v = if kind == OutcomeKind::Degrees {
                v.to_radians()
            } else {
                v
            };
            Angle::new(v).map_err(|e| Error::Data(e.to_string()))
        }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "N/A" | "NaN" | "nan")
}

/// Row accounting for one ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestionLog {
    pub n_total: usize,
    pub n_used: usize,
    pub n_dropped: usize,
    /// Drop counts keyed by reason; each dropped row is counted once.
    pub dropped: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct LoadedData {
    pub dataset: CausalDataset,
    pub log: IngestionLog,
    /// Design column names after the intercept.
    pub covariate_names: Vec<String>,
}

enum Cell {
    Numeric(f64),
    Level(String),
}

struct RawRow {
    treated: bool,
    theta: Angle,
    covariates: Vec<Cell>,
}

/// Complete-case load of the configured columns.
pub fn load_dataset(config: &AnalysisConfig) -> Result<LoadedData> {
    let file = File::open(&config.input).map_err(|source| Error::Io {
        path: config.input.clone(),
        source,
    })?;
    read_dataset(file, config)
}

/// As [`load_dataset`], reading CSV from any source.
pub fn read_dataset<R: Read>(source: R, config: &AnalysisConfig) -> Result<LoadedData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("reading header: {e}")))?
        .clone();
    let mut seen = HashSet::new();
    for h in headers.iter() {
        if !seen.insert(h) {
            return Err(Error::Data(format!("duplicate header '{h}'")));
        }
    }
    let index = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column '{name}' not found in input header")))
    };
    let t_idx = index(&config.treatment.column)?;
    let o_idx = index(&config.outcome.column)?;
    let c_idx = config
        .confounders
        .iter()
        .map(|c| index(&c.column))
        .collect::<Result<Vec<_>>>()?;

    let mut log = IngestionLog::default();
    let mut drop = |reason: String| {
        *log.dropped.entry(reason).or_insert(0) += 1;
    };
    let mut rows = Vec::new();
    let mut n_total = 0;
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Data(format!("row {line}: {e}")))?;
        n_total += 1;

        let t = &record[t_idx];
        if is_missing(t) {
            drop("missing treatment".into());
            continue;
        }
        let t = t.trim();
        let treated = t == config.treatment.treated_value;
        if let Some(control) = &config.treatment.control_value {
            if !treated && t != control {
                return Err(Error::Data(format!(
                    "row {line}: treatment value '{t}' is neither '{}' nor '{control}'",
                    config.treatment.treated_value
                )));
            }
        }

        let o = &record[o_idx];
        if is_missing(o) {
            drop("missing outcome".into());
            continue;
        }
        let theta = parse_outcome(o, config.outcome.kind)
            .map_err(|e| Error::Data(format!("row {line}, column '{}': {e}", config.outcome.column)))?;

        let mut covariates = Vec::with_capacity(c_idx.len());
        let mut missing = None;
        for (spec, &j) in config.confounders.iter().zip(&c_idx) {
            let cell = &record[j];
            if is_missing(cell) {
                missing = Some(&spec.column);
                break;
            }
            covariates.push(match spec.kind {
                CovariateKind::Numeric => {
                    let v: f64 = cell.trim().parse().map_err(|_| {
                        Error::Data(format!(
                            "row {line}, column '{}': '{cell}' is not a number",
                            spec.column
                        ))
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Data(format!(
                            "row {line}, column '{}': non-finite value",
                            spec.column
                        )));
                    }
                    Cell::Numeric(v)
                }
                CovariateKind::Categorical => Cell::Level(cell.trim().to_string()),
            });
        }
        if let Some(col) = missing {
            drop(format!("missing confounder '{col}'"));
            continue;
        }
        rows.push(RawRow {
            treated,
            theta,
            covariates,
        });
    }
    log.n_total = n_total;
    log.n_used = rows.len();
    log.n_dropped = n_total - rows.len();

    if rows.is_empty() {
        return Err(Error::Data(format!(
            "no usable rows among {n_total} (dropped: {:?})",
            log.dropped
        )));
    }

    // Levels are taken from the rows that survive complete-case filtering.
    let mut names = Vec::new();
    let mut levels: Vec<Vec<String>> = Vec::with_capacity(config.confounders.len());
    for (k, spec) in config.confounders.iter().enumerate() {
        match spec.kind {
            CovariateKind::Numeric => {
                names.push(spec.column.clone());
                levels.push(Vec::new());
            }
            CovariateKind::Categorical => {
                let set: BTreeSet<&str> = rows
                    .iter()
                    .map(|r| match &r.covariates[k] {
                        Cell::Level(s) => s.as_str(),
                        Cell::Numeric(_) => unreachable!(),
                    })
                    .collect();
                let kept: Vec<String> = set.into_iter().skip(1).map(str::to_string).collect();
                names.extend(kept.iter().map(|l| format!("{}={l}", spec.column)));
                levels.push(kept);
            }
        }
    }

    let units = rows
        .into_iter()
        .map(|r| {
            let mut x = Vec::with_capacity(1 + names.len());
            x.push(1.0);
            for (cell, lv) in r.covariates.iter().zip(&levels) {
                match cell {
                    Cell::Numeric(v) => x.push(*v),
                    Cell::Level(s) => x.extend(lv.iter().map(|l| if l == s { 1.0 } else { 0.0 })),
                }
            }
            Unit {
                treated: r.treated,
                x,
                theta: r.theta,
            }
        })
        .collect();

    Ok(LoadedData {
        dataset: CausalDataset::new(units)?,
        log,
        covariate_names: names,
    })
}
