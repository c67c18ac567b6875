//! Logistic propensity model `π(x) = 1 / (1 + exp(−xᵀη))` fitted by maximum
//! likelihood with damped Newton–Raphson.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Fitted probabilities never leave `[PROB_FLOOR, 1 − PROB_FLOOR]`.
pub const PROB_FLOOR: f64 = f64::EPSILON / 2.0;

/// One unit's covariates (intercept first) and treatment indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub x: Vec<f64>,
    pub treated: bool,
}

impl DesignRow {
    pub fn new(x: Vec<f64>, treated: bool) -> Self {
        DesignRow { x, treated }
    }

    fn a(&self) -> f64 {
        if self.treated {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Convergence threshold on `‖Σ (Aᵢ − π̂ᵢ) Xᵢ‖∞`.
    pub tol_score: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub delta_sep: f64,
    /// `‖η‖₂` beyond which the fit is declared separated.
    pub eta_max: f64,
    /// Every covariate must satisfy `|x| < covariate_bound`.
    pub covariate_bound: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol_score: 1e-9,
            max_iter: 100,
            max_halvings: 30,
            delta_sep: 1e-8,
            eta_max: 50.0,
            covariate_bound: 1e6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropensityFit {
    pub eta: Vec<f64>,
    /// `π̂(Xᵢ)` for every input row, in input order.
    pub fitted: Vec<f64>,
    pub n_iter: usize,
    pub max_score_norm: f64,
    /// `(1/n) Σ π̂ᵢ(1 − π̂ᵢ) Xᵢ Xᵢᵀ`.
    pub fisher_info: DMatrix<f64>,
    /// Log-likelihood after each accepted iterate, starting from `η = 0`.
    pub loglik_path: Vec<f64>,
}

impl PropensityFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        predict(&self.eta, x)
    }
}

/// Overflow-safe logistic function, saturating inside `(0, 1)`.
pub fn logistic(z: f64) -> f64 {
    let p = if z > 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// `log(1 + exp(z))` without overflow.
fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn dot(x: &[f64], eta: &[f64]) -> f64 {
    x.iter().zip(eta).map(|(a, b)| a * b).sum()
}

/// `π(x)` for coefficients `eta`.
pub fn predict(eta: &[f64], x: &[f64]) -> f64 {
    logistic(dot(x, eta))
}

pub fn log_likelihood(rows: &[DesignRow], eta: &[f64]) -> f64 {
    rows.iter()
        .map(|r| {
            let z = dot(&r.x, eta);
            r.a() * z - log1p_exp(z)
        })
        .sum()
}

/// `Σ (Aᵢ − π(Xᵢ)) Xᵢ`.
pub fn score(rows: &[DesignRow], eta: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; eta.len()];
    for r in rows {
        let resid = r.a() - predict(eta, &r.x);
        for (sj, xj) in s.iter_mut().zip(&r.x) {
            *sj += resid * xj;
        }
    }
    s
}

/// `Σ π(Xᵢ)(1 − π(Xᵢ)) Xᵢ Xᵢᵀ` (not averaged).
fn information(rows: &[DesignRow], eta: &[f64]) -> DMatrix<f64> {
    let k = eta.len();
    let mut info = DMatrix::<f64>::zeros(k, k);
    for r in rows {
        let p = predict(eta, &r.x);
        let w = p * (1.0 - p);
        for i in 0..k {
            let wi = w * r.x[i];
            for j in 0..=i {
                info[(i, j)] += wi * r.x[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            info[(j, i)] = info[(i, j)];
        }
    }
    info
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn validate_rows(rows: &[DesignRow], bound: f64) -> Result<usize> {
    let k = rows
        .first()
        .map(|r| r.x.len())
        .ok_or_else(|| Error::Domain("no design rows".into()))?;
    if k == 0 {
        return Err(Error::Domain("design rows have no columns".into()));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.x.len() != k {
            return Err(Error::Domain(format!(
                "row {i} has {} covariates, expected {k}",
                r.x.len()
            )));
        }
        if r.x[0] != 1.0 {
            return Err(Error::Domain(format!("row {i}: intercept entry must be 1")));
        }
        if let Some(v) = r.x.iter().find(|v| !(v.is_finite() && v.abs() < bound)) {
            return Err(Error::Domain(format!(
                "row {i}: covariate {v} is non-finite or exceeds bound {bound}"
            )));
        }
    }
    Ok(k)
}

/// Maximum likelihood fit of the logistic propensity model.
pub fn fit_logistic(rows: &[DesignRow], options: &FitOptions) -> Result<PropensityFit> {
    let k = validate_rows(rows, options.covariate_bound)?;
    let n = rows.len();
    let n_treated = rows.iter().filter(|r| r.treated).count();
    if n_treated == 0 || n_treated == n {
        return Err(Error::DegenerateTreatment(format!(
            "{n_treated} of {n} units treated; both arms must be non-empty"
        )));
    }
    if n < k {
        return Err(Error::Domain(format!(
            "{n} rows cannot identify {k} coefficients"
        )));
    }

    let any_saturated = |eta: &[f64]| {
        rows.iter().any(|r| {
            let p = predict(eta, &r.x);
            p <= options.delta_sep || p >= 1.0 - options.delta_sep
        })
    };

    let mut eta = vec![0.0; k];
    let mut ll = log_likelihood(rows, &eta);
    let mut loglik_path = vec![ll];
    let mut n_iter = 0;
    loop {
        let s = score(rows, &eta);
        let s_norm = max_norm(&s);
        if s_norm <= options.tol_score {
            if l2_norm(&eta) > options.eta_max {
                return Err(Error::Separation);
            }
            let fitted = rows.iter().map(|r| predict(&eta, &r.x)).collect();
            let fisher_info = information(rows, &eta) / n as f64;
            return Ok(PropensityFit {
                eta,
                fitted,
                n_iter,
                max_score_norm: s_norm,
                fisher_info,
                loglik_path,
            });
        }
        if l2_norm(&eta) > options.eta_max {
            return Err(Error::Separation);
        }
        if n_iter >= options.max_iter {
            if any_saturated(&eta) {
                return Err(Error::Separation);
            }
            return Err(Error::NoConvergence {
                iterations: n_iter,
                score_norm: s_norm,
            });
        }

        let info = information(rows, &eta);
        let l = match linalg::cholesky(&info) {
            Ok(l) => l,
            Err(e) if any_saturated(&eta) => {
                log::debug!("information singular at saturated fit: {e}");
                return Err(Error::Separation);
            }
            Err(e) => return Err(e),
        };
        let step = linalg::cholesky_solve_vec(&l, &DVector::from_vec(s));

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=options.max_halvings {
            let cand: Vec<f64> = eta.iter().zip(step.iter()).map(|(e, d)| e + t * d).collect();
            let ll_cand = log_likelihood(rows, &cand);
            // Near the optimum the likelihood change drops below rounding
            // noise; a smaller score then decides.
            let flat = ll_cand >= ll - 64.0 * f64::EPSILON * (1.0 + ll.abs())
                && max_norm(&score(rows, &cand)) < s_norm;
            if ll_cand >= ll || flat {
                accepted = Some((cand, ll_cand));
                break;
            }
            t *= 0.5;
        }
        n_iter += 1;
        match accepted {
            Some((cand, ll_cand)) => {
                eta = cand;
                ll = ll_cand;
                loglik_path.push(ll);
            }
            None => {
                if any_saturated(&eta) {
                    return Err(Error::Separation);
                }
                return Err(Error::NoConvergence {
                    iterations: n_iter,
                    score_norm: s_norm,
                });
            }
        }
    }
}
