//! Monte Carlo study with wrapped Cauchy potential outcomes.
//!
//! Covariates are `X = (1, X₁, X₂, X₃)` with independent Beta(2,1)
//! components, treatment follows `logit P(A=1|X) = 1 + X₁ + X₂ + X₃`, and
//! with `S = X₁ + X₂ + X₃` the potential outcomes are
//!
//! | scenario | Θ⁽¹⁾ \| X        | Θ⁽⁰⁾ \| X          |
//! |----------|-----------------|--------------------|
//! | 1        | WC(S, 5/6)      | WC(S/2, 2/3)       |
//! | 2        | WC(1, S/3)      | WC(0, S/4)         |
//! | 3        | WC(S, S/3)      | WC(S/2, S/4)       |

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circular::{wrap_to_pi, Angle};
use crate::error::{Error, Result};
use crate::estimators::{estimate_effects, estimate_omega, CausalDataset, Unit, WeightScheme};
use crate::propensity::{fit_logistic, logistic, FitOptions};
use crate::variance::{estimate_with_covariance, wald_interval};

/// Effect sizes the scenarios were designed around.
pub const NOMINAL_TAU: f64 = 1.0;
pub const NOMINAL_XI: f64 = 1.0 / 6.0;

/// Fraction of failed replications above which a summary is flagged.
pub const FAILURE_FLAG_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Heterogeneous direction effect, constant concentration.
    One,
    /// Constant direction effect, heterogeneous concentration.
    Two,
    /// Both heterogeneous.
    Three,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::One, Scenario::Two, Scenario::Three];

    pub fn from_id(id: u8) -> Result<Scenario> {
        match id {
            1 => Ok(Scenario::One),
            2 => Ok(Scenario::Two),
            3 => Ok(Scenario::Three),
            _ => Err(Error::Config(format!("scenario must be 1, 2 or 3, got {id}"))),
        }
    }

    pub fn id(self) -> u8 {
        match self {
            Scenario::One => 1,
            Scenario::Two => 2,
            Scenario::Three => 3,
        }
    }

    /// Wrapped Cauchy `((μ⁽¹⁾, ρ⁽¹⁾), (μ⁽⁰⁾, ρ⁽⁰⁾))` given `S = X₁ + X₂ + X₃`.
    pub fn outcome_parameters(self, s: f64) -> ((f64, f64), (f64, f64)) {
        match self {
            Scenario::One => ((s, 5.0 / 6.0), (s / 2.0, 2.0 / 3.0)),
            Scenario::Two => ((1.0, s / 3.0), (0.0, s / 4.0)),
            Scenario::Three => ((s, s / 3.0), (s / 2.0, s / 4.0)),
        }
    }

    /// Population first trigonometric moments `E[e^{iΘ⁽¹⁾}]`, `E[e^{iΘ⁽⁰⁾}]`.
    ///
    /// A wrapped Cauchy has moment `ρ e^{iμ}`, so these reduce to
    /// expectations over `S`, which factor into one-dimensional Beta(2,1)
    /// integrals evaluated by Simpson's rule.
    pub fn population_moments(self) -> (Complex64, Complex64) {
        // E[e^{itX}] and E[X e^{itX}] for X ~ Beta(2,1)
        let cf = |t: f64| simpson(|x| 2.0 * x * Complex64::from_polar(1.0, t * x));
        let cf_x = |t: f64| simpson(|x| 2.0 * x * x * Complex64::from_polar(1.0, t * x));
        match self {
            Scenario::One => (cf(1.0).powu(3) * (5.0 / 6.0), cf(0.5).powu(3) * (2.0 / 3.0)),
            // E[S] = 2
            Scenario::Two => (Complex64::from_polar(2.0 / 3.0, 1.0), Complex64::new(0.5, 0.0)),
            // E[S e^{itS}] = 3 E[X e^{itX}] E[e^{itX}]²
            Scenario::Three => (
                cf_x(1.0) * cf(1.0).powu(2),
                cf_x(0.5) * cf(0.5).powu(2) * 0.75,
            ),
        }
    }

    /// Population `(τ, ξ)` implied by the outcome model.
    pub fn population_effects(self) -> (f64, f64) {
        let (m1, m0) = self.population_moments();
        (wrap_to_pi(m1.arg() - m0.arg()), m1.norm() - m0.norm())
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

fn simpson(f: impl Fn(f64) -> Complex64) -> Complex64 {
    const INTERVALS: usize = 2000;
    let h = 1.0 / INTERVALS as f64;
    let mut acc = f(0.0) + f(1.0);
    for i in 1..INTERVALS {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(i as f64 * h) * w;
    }
    acc * (h / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n: usize,
    pub true_tau: f64,
    pub true_xi: f64,
    pub seed: u64,
    pub replications: usize,
    pub level: f64,
}

impl ScenarioSpec {
    /// Spec whose truth is the scenario's population effect.
    pub fn new(scenario: Scenario, n: usize, replications: usize, seed: u64) -> Result<Self> {
        let (true_tau, true_xi) = scenario.population_effects();
        let spec = ScenarioSpec {
            scenario,
            n,
            true_tau,
            true_xi,
            seed,
            replications,
            level: 0.95,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 50 {
            return Err(Error::Config(format!("n must be at least 50, got {}", self.n)));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level {} not in (0, 1)", self.level)));
        }
        Ok(())
    }
}

/// Independent stream seed for one replication.
pub fn replication_seed(seed: u64, rep_index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(seed ^ splitmix(rep_index))
}

/// Inverse CDF of Beta(2,1): `F(x) = x²`.
pub fn beta21_from_uniform(u: f64) -> f64 {
    u.sqrt()
}

pub fn sample_beta21<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    beta21_from_uniform(rng.random::<f64>())
}

/// Draw from WC(μ, ρ) by wrapping a Cauchy with scale `−ln ρ`.
pub fn sample_wrapped_cauchy<R: Rng + ?Sized>(mu: Angle, rho: f64, rng: &mut R) -> Result<Angle> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!("wrapped Cauchy ρ = {rho} outside [0, 1]")));
    }
    if rho == 1.0 {
        return Ok(mu);
    }
    let u: f64 = rng.sample(Open01);
    if rho == 0.0 {
        return Angle::new(TAU * u);
    }
    let gamma = -rho.ln();
    Angle::new(mu.radians() + gamma * (PI * (u - 0.5)).tan())
}

/// One simulated sample together with its unobserved potential outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub dataset: CausalDataset,
    pub theta1: Vec<Angle>,
    pub theta0: Vec<Angle>,
    /// True `P(A=1|X)` per unit.
    pub propensity: Vec<f64>,
}

/// Raw draws for `n` units; the observed sample may have an empty arm.
pub fn draw_units<R: Rng + ?Sized>(
    scenario: Scenario,
    n: usize,
    rng: &mut R,
) -> Result<(Vec<Unit>, Vec<Angle>, Vec<Angle>, Vec<f64>)> {
    let mut units = Vec::with_capacity(n);
    let mut theta1 = Vec::with_capacity(n);
    let mut theta0 = Vec::with_capacity(n);
    let mut propensity = Vec::with_capacity(n);
    for _ in 0..n {
        let x = [sample_beta21(rng), sample_beta21(rng), sample_beta21(rng)];
        let s = x[0] + x[1] + x[2];
        let p = logistic(1.0 + s);
        let treated = rng.random::<f64>() < p;
        let ((mu1, rho1), (mu0, rho0)) = scenario.outcome_parameters(s);
        let t1 = sample_wrapped_cauchy(Angle::new(mu1)?, rho1, rng)?;
        let t0 = sample_wrapped_cauchy(Angle::new(mu0)?, rho0, rng)?;
        units.push(Unit {
            treated,
            x: vec![1.0, x[0], x[1], x[2]],
            theta: if treated { t1 } else { t0 },
        });
        theta1.push(t1);
        theta0.push(t0);
        propensity.push(p);
    }
    Ok((units, theta1, theta0, propensity))
}

/// Deterministic in `(spec.seed, rep_index)`.
pub fn generate_dataset(spec: &ScenarioSpec, rep_index: u64) -> Result<SimulatedData> {
    let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(spec.seed, rep_index));
    let (units, theta1, theta0, propensity) = draw_units(spec.scenario, spec.n, &mut rng)?;
    Ok(SimulatedData {
        dataset: CausalDataset::new(units)?,
        theta1,
        theta0,
        propensity,
    })
}

/// Estimates from one replication under one scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationEstimate {
    pub scheme: WeightScheme,
    pub tau: f64,
    pub xi: f64,
    /// Absent when the variance step failed for this replication.
    pub interval: Option<ReplicationInterval>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationInterval {
    pub se_tau: f64,
    pub se_xi: f64,
    pub covers_tau: bool,
    pub covers_xi: bool,
}

/// Fit, estimate and cover under both schemes (HT first).
///
/// Fails only when the point estimates cannot be formed. A failed variance
/// step leaves the point estimates in place and sets `interval` to `None`.
pub fn run_replication(spec: &ScenarioSpec, rep_index: u64) -> Result<[ReplicationEstimate; 2]> {
    let data = generate_dataset(spec, rep_index)?;
    let fit = fit_logistic(&data.dataset.design_rows(), &FitOptions::default())?;
    let one = |scheme| -> Result<ReplicationEstimate> {
        let est = estimate_effects(&estimate_omega(&data.dataset, &fit.fitted, scheme)?)?;
        let interval = estimate_with_covariance(&data.dataset, &fit, scheme)
            .and_then(|(_, est)| wald_interval(&est, spec.level))
            .map(|ci| ReplicationInterval {
                se_tau: ci.se_tau,
                se_xi: ci.se_xi,
                covers_tau: ci.covers_tau(spec.true_tau),
                covers_xi: ci.covers_xi(spec.true_xi),
            });
        if let Err(e) = &interval {
            log::debug!("replication {rep_index} ({scheme}): no interval: {e}");
        }
        Ok(ReplicationEstimate {
            scheme,
            tau: est.tau,
            xi: est.xi,
            interval: interval.ok(),
        })
    };
    Ok([one(WeightScheme::HorvitzThompson)?, one(WeightScheme::Hajek)?])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimand {
    #[serde(rename = "tau")]
    Tau,
    #[serde(rename = "xi")]
    Xi,
}

impl Estimand {
    pub fn label(self) -> &'static str {
        match self {
            Estimand::Tau => "tau",
            Estimand::Xi => "xi",
        }
    }
}

/// BIAS / S.E. / MSE / CR for one estimand and scheme.
///
/// `se` is the sample standard deviation of the estimates (denominator
/// `R − 1`), so `mse = bias² + se²·(R−1)/R`. Errors in `τ` are wrapped
/// into `(−π, π]` before any aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub estimand: Estimand,
    pub scheme: WeightScheme,
    pub bias: f64,
    pub se: Option<f64>,
    pub mse: f64,
    /// Coverage among replications with an interval; absent if there are none.
    pub cr: Option<f64>,
    /// Average of the per-replication sandwich standard errors.
    pub mean_est_se: Option<f64>,
    /// Replications that produced an interval.
    pub n_intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub spec: ScenarioSpec,
    /// Replications without point estimates (separation, undefined direction).
    pub n_failed: usize,
    /// Replications with point estimates but at least one failed variance step.
    pub n_variance_failed: usize,
    /// Set when more than 1% of replications failed in either way.
    pub flagged: bool,
    pub rows: Vec<SummaryRow>,
}

impl SimSummary {
    pub fn row(&self, estimand: Estimand, scheme: WeightScheme) -> &SummaryRow {
        self.rows
            .iter()
            .find(|r| r.estimand == estimand && r.scheme == scheme)
            .expect("summary holds every estimand/scheme pair")
    }
}

fn summarize(
    estimand: Estimand,
    scheme: WeightScheme,
    errors: &[f64],
    intervals: &[(bool, f64)],
) -> SummaryRow {
    let r = errors.len() as f64;
    let bias = errors.iter().sum::<f64>() / r;
    let mse = errors.iter().map(|e| e * e).sum::<f64>() / r;
    let se = (errors.len() > 1).then(|| {
        let ss: f64 = errors.iter().map(|e| (e - bias).powi(2)).sum();
        (ss / (r - 1.0)).sqrt()
    });
    SummaryRow {
        estimand,
        scheme,
        bias,
        se,
        mse,
        cr: (!intervals.is_empty())
            .then(|| intervals.iter().filter(|c| c.0).count() as f64 / intervals.len() as f64),
        mean_est_se: (!intervals.is_empty())
            .then(|| intervals.iter().map(|c| c.1).sum::<f64>() / intervals.len() as f64),
        n_intervals: intervals.len(),
    }
}

/// All replications, in replication order.
pub fn run_replications(spec: &ScenarioSpec) -> Result<Vec<Result<[ReplicationEstimate; 2]>>> {
    spec.validate()?;
    Ok((0..spec.replications as u64)
        .into_par_iter()
        .map(|r| run_replication(spec, r))
        .collect())
}

pub fn run_study(spec: &ScenarioSpec) -> Result<SimSummary> {
    let outcomes = run_replications(spec)?;
    let mut ok = Vec::with_capacity(outcomes.len());
    let mut n_failed = 0;
    for (rep, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(est) => ok.push(est),
            Err(e) => {
                log::warn!("replication {rep} failed: {e}");
                n_failed += 1;
            }
        }
    }
    if ok.is_empty() {
        return Err(Error::Numerical(format!(
            "all {} replications failed",
            spec.replications
        )));
    }
    let mut rows = Vec::with_capacity(4);
    for estimand in [Estimand::Tau, Estimand::Xi] {
        for (k, scheme) in WeightScheme::ALL.into_iter().enumerate() {
            let mut errors = Vec::with_capacity(ok.len());
            let mut intervals = Vec::with_capacity(ok.len());
            for e in ok.iter().map(|e| e[k]) {
                errors.push(match estimand {
                    Estimand::Tau => wrap_to_pi(e.tau - spec.true_tau),
                    Estimand::Xi => e.xi - spec.true_xi,
                });
                if let Some(ci) = e.interval {
                    intervals.push(match estimand {
                        Estimand::Tau => (ci.covers_tau, ci.se_tau),
                        Estimand::Xi => (ci.covers_xi, ci.se_xi),
                    });
                }
            }
            rows.push(summarize(estimand, scheme, &errors, &intervals));
        }
    }
    let n_variance_failed = ok
        .iter()
        .filter(|e| e.iter().any(|s| s.interval.is_none()))
        .count();
    let limit = FAILURE_FLAG_RATE * spec.replications as f64;
    Ok(SimSummary {
        spec: *spec,
        n_failed,
        n_variance_failed,
        flagged: n_failed as f64 > limit || n_variance_failed as f64 > limit,
        rows,
    })
}

pub const SUMMARY_CSV_HEADER: [&str; 9] =
    ["scenario", "n", "estimand", "scheme", "BIAS", "SE", "MSE", "CR", "n_failed"];

/// Writes summaries as CSV, one row per (estimand, scheme).
pub fn write_summary_csv<W: Write>(summaries: &[SimSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Data(format!("writing summary: {e}"));
    w.write_record(SUMMARY_CSV_HEADER).map_err(csv_err)?;
    for s in summaries {
        for r in &s.rows {
            w.write_record([
                s.spec.scenario.to_string(),
                s.spec.n.to_string(),
                r.estimand.label().to_string(),
                r.scheme.label().to_string(),
                r.bias.to_string(),
                r.se.map(|v| v.to_string()).unwrap_or_default(),
                r.mse.to_string(),
                r.cr.map(|v| v.to_string()).unwrap_or_default(),
                s.n_failed.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()
        .map_err(|e| Error::Data(format!("writing summary: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn beta21_inverse_cdf() {
        assert_eq!(beta21_from_uniform(0.25), 0.5);
        assert_eq!(beta21_from_uniform(1.0), 1.0);
    }

    #[test]
    fn wrapped_cauchy_degenerate_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu = Angle::new(2.0).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_wrapped_cauchy(mu, 1.0, &mut rng).unwrap(), mu);
        }
        assert!(sample_wrapped_cauchy(mu, 1.5, &mut rng).is_err());
        assert!(sample_wrapped_cauchy(mu, -0.1, &mut rng).is_err());
        let n = 100_000;
        let (mut c, mut s) = (0.0, 0.0);
        for _ in 0..n {
            let t = sample_wrapped_cauchy(mu, 0.0, &mut rng).unwrap().radians();
            c += t.cos();
            s += t.sin();
        }
        assert!((c / n as f64).hypot(s / n as f64) <= 0.02);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = ScenarioSpec::new(Scenario::Three, 200, 5, 42).unwrap();
        let a = generate_dataset(&spec, 3).unwrap();
        let b = generate_dataset(&spec, 3).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&spec, 4).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn spec_validation() {
        assert!(ScenarioSpec::new(Scenario::One, 49, 1, 0).is_err());
        assert!(ScenarioSpec::new(Scenario::One, 50, 0, 0).is_err());
        assert!(Scenario::from_id(4).is_err());
        assert_eq!(Scenario::from_id(2).unwrap(), Scenario::Two);
    }

    #[test]
    fn scenario_two_truth_is_nominal() {
        let (tau, xi) = Scenario::Two.population_effects();
        assert_abs_diff_eq!(tau, NOMINAL_TAU, epsilon = 1e-15);
        assert_abs_diff_eq!(xi, NOMINAL_XI, epsilon = 1e-15);
    }

    #[test]
    fn single_replication_has_no_se() {
        let spec = ScenarioSpec::new(Scenario::Two, 1000, 1, 9).unwrap();
        let s = run_study(&spec).unwrap();
        assert_eq!(s.rows.len(), 4);
        assert!(s.rows.iter().all(|r| r.se.is_none()));
        let mut buf = Vec::new();
        write_summary_csv(&[s], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("scenario,n,estimand,scheme,BIAS,SE,MSE,CR,n_failed\n"));
        assert!(text.lines().nth(1).unwrap().contains(",,"));
    }

    #[test]
    fn summary_identities() {
        let spec = ScenarioSpec::new(Scenario::One, 150, 40, 77).unwrap();
        let s = run_study(&spec).unwrap();
        let r = (spec.replications - s.n_failed) as f64;
        for row in &s.rows {
            let se = row.se.unwrap();
            assert!(row.mse >= 0.0);
            assert!((row.mse - (row.bias.powi(2) + se * se * (r - 1.0) / r)).abs() <= 1e-10);
            assert!((0.0..=1.0).contains(&row.cr.unwrap()));
        }
        let ht = s.row(Estimand::Tau, WeightScheme::HorvitzThompson);
        let hj = s.row(Estimand::Tau, WeightScheme::Hajek);
        assert!((ht.bias - hj.bias).abs() <= 1e-12);
        assert!((ht.se.unwrap() - hj.se.unwrap()).abs() <= 1e-12);
        assert_eq!(run_study(&spec).unwrap(), s);
    }
}
