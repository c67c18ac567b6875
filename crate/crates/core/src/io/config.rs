use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::WeightScheme;

/// How the outcome column encodes an angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Radians,
    Degrees,
    /// 24-hour clock time `HH:MM`, with 24 h mapped onto 2π.
    Clock24,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateKind {
    #[default]
    Numeric,
    /// One-hot encoded, dropping the lexicographically smallest level.
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeSelection {
    Ht,
    Hajek,
    #[default]
    Both,
}

impl SchemeSelection {
    pub fn schemes(self) -> Vec<WeightScheme> {
        match self {
            SchemeSelection::Ht => vec![WeightScheme::HorvitzThompson],
            SchemeSelection::Hajek => vec![WeightScheme::Hajek],
            SchemeSelection::Both => WeightScheme::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::Config(format!("unknown report format '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreatmentColumn {
    pub column: String,
    /// Cell value marking a treated unit.
    pub treated_value: String,
    /// When set, any value other than these two is a data error.
    #[serde(default)]
    pub control_value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeColumn {
    pub column: String,
    pub kind: OutcomeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfounderColumn {
    pub column: String,
    #[serde(default)]
    pub kind: CovariateKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default)]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub format: ReportFormat,
    /// Per-arm resultant vectors.
    #[serde(default)]
    pub vectors: Option<PathBuf>,
    /// Per-unit `(arm, angle, weight)` records.
    #[serde(default)]
    pub units: Option<PathBuf>,
}

/// A complete description of one analysis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub input: PathBuf,
    pub treatment: TreatmentColumn,
    pub outcome: OutcomeColumn,
    #[serde(default)]
    pub confounders: Vec<ConfounderColumn>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub scheme: SchemeSelection,
    #[serde(default)]
    pub output: OutputPaths,
}

fn default_level() -> f64 {
    0.95
}

impl AnalysisConfig {
    /// Parses TOML text and validates it.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: AnalysisConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!(
                "level must lie in (0, 1), got {}",
                self.level
            )));
        }
        let mut seen = HashSet::new();
        let roles = [
            ("treatment", &self.treatment.column),
            ("outcome", &self.outcome.column),
        ]
        .into_iter()
        .chain(self.confounders.iter().map(|c| ("confounder", &c.column)));
        for (role, column) in roles {
            if column.is_empty() {
                return Err(Error::Config(format!("empty {role} column name")));
            }
            if !seen.insert(column.as_str()) {
                return Err(Error::Config(format!(
                    "column '{column}' is assigned more than one role"
                )));
            }
        }
        if let Some(c) = &self.treatment.control_value {
            if c == &self.treatment.treated_value {
                return Err(Error::Config(
                    "treated_value and control_value must differ".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Reads a TOML config. A relative `input` path is resolved against the
/// config file's directory.
pub fn parse_config(path: &Path) -> Result<AnalysisConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = AnalysisConfig::from_toml_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if cfg.input.is_relative() {
        if let Some(dir) = path.parent() {
            cfg.input = dir.join(&cfg.input);
        }
    }
    Ok(cfg)
}
