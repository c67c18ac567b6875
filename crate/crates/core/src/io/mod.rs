//! Configuration, CSV ingestion, end-to-end analysis and report output.

pub mod config;
pub mod ingest;
pub mod report;

pub use config::{parse_config, AnalysisConfig, CovariateKind, OutcomeKind, ReportFormat, SchemeSelection};
pub use ingest::{load_dataset, radians_to_minutes, read_dataset, time_to_radians, IngestionLog, LoadedData};
pub use report::{emit_report, emit_vectors, parse_report_csv, AnalysisReport, Arm, ArmVector, ReportRow};

use crate::error::Result;
use crate::estimators::arm_weights;
use crate::propensity::{fit_logistic, FitOptions};
use crate::variance::{estimate_with_covariance, wald_interval};
use report::{PropensitySummary, SchemeResult, UnitWeight};

/// Loads the configured file and runs the full analysis.
pub fn run_analysis(config: &AnalysisConfig) -> Result<AnalysisReport> {
    let loaded = load_dataset(config).map_err(|e| e.in_stage("ingest"))?;
    analyze_loaded(config, loaded)
}

/// Propensity fit, weighting and variance on already-loaded data.
pub fn analyze_loaded(config: &AnalysisConfig, loaded: LoadedData) -> Result<AnalysisReport> {
    let LoadedData {
        dataset,
        log,
        covariate_names,
    } = loaded;
    let fit = fit_logistic(&dataset.design_rows(), &FitOptions::default())
        .map_err(|e| e.in_stage("propensity"))?;
    log::info!(
        "propensity converged in {} iterations (max |score| {:.2e})",
        fit.n_iter,
        fit.max_score_norm
    );

    let mut results = Vec::new();
    let mut vectors = Vec::new();
    let mut units = Vec::new();
    for scheme in config.scheme.schemes() {
        let (omega, effect) =
            estimate_with_covariance(&dataset, &fit, scheme).map_err(|e| e.in_stage("estimation"))?;
        let ci = wald_interval(&effect, config.level).map_err(|e| e.in_stage("variance"))?;
        results.push(
            SchemeResult {
                scheme,
                tau: effect.tau,
                se_tau: ci.se_tau,
                tau_ci: [ci.lo_tau, ci.hi_tau],
                tau_minutes: None,
                tau_ci_minutes: None,
                xi: effect.xi,
                se_xi: ci.se_xi,
                xi_ci: [ci.lo_xi, ci.hi_xi],
            }
            .with_minutes(config.outcome.kind),
        );
        for (arm, v) in [(Arm::Treated, omega.treated), (Arm::Control, omega.control)] {
            vectors.push(ArmVector {
                scheme,
                arm,
                alpha: v.alpha,
                beta: v.beta,
                mu: v.direction().map_err(|e| e.in_stage("estimation"))?.radians(),
                rho: v.length(),
            });
        }
        let (w1, w0) = arm_weights(&dataset, &fit.fitted, scheme).map_err(|e| e.in_stage("estimation"))?;
        for (i, u) in dataset.units().iter().enumerate() {
            let (arm, weight) = if u.treated {
                (Arm::Treated, w1[i])
            } else {
                (Arm::Control, w0[i])
            };
            units.push(UnitWeight {
                scheme,
                arm,
                angle: u.theta.radians(),
                weight,
            });
        }
    }

    let n_treated = dataset.n_treated();
    Ok(AnalysisReport {
        outcome_kind: config.outcome.kind,
        level: config.level,
        n_total: log.n_total,
        n_used: log.n_used,
        n_dropped: log.n_dropped,
        dropped: log.dropped,
        n_treated,
        n_control: dataset.len() - n_treated,
        propensity: PropensitySummary {
            covariates: covariate_names,
            coefficients: fit.eta.clone(),
            iterations: fit.n_iter,
            max_score_norm: fit.max_score_norm,
        },
        results,
        vectors,
        units,
    })
}
