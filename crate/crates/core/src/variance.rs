//! Empirical M-estimation sandwich for the nuisance vector `ω` and its
//! delta-method propagation to `(τ, ξ)`.
//!
//! The stacked estimating function is `ψ = (ψ_η, ψ_ω)` with
//! `ψ_η = (A − π(X)) X` and, per scheme,
//!
//! * HT: `A cos Θ / π(X) − α⁽¹⁾`, `(1−A) cos Θ / (1−π(X)) − α⁽⁰⁾`, and sine analogues;
//! * Hájek: `A (cos Θ − α⁽¹⁾) / π(X)`, `(1−A)(cos Θ − α⁽⁰⁾) / (1−π(X))`, and sine analogues.
//!
//! The asymptotic covariance of `√n(ω̂ − ω)` is `−b21 a11⁻¹ b21ᵀ + b22`,
//! where every block is a sample average evaluated at the estimates.

use nalgebra::{DMatrix, Matrix2, Matrix2x4, Matrix4, SMatrix};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::circular::{wrap_to_pi, EPS_RHO};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_effects, estimate_omega, CausalDataset, EffectEstimate, OmegaEstimate, WeightScheme,
};
use crate::linalg;
use crate::propensity::PropensityFit;

/// Standard normal 0.975 quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichPieces {
    /// `(1/n) Σ π̂(1−π̂) X Xᵀ`.
    pub a11: DMatrix<f64>,
    /// `(1/n) Σ ψ_ω ψ_ηᵀ`, 4 × (1+p).
    pub b21: DMatrix<f64>,
    /// `(1/n) Σ ψ_ω ψ_ωᵀ`.
    pub b22: Matrix4<f64>,
    pub scheme: WeightScheme,
    pub n: usize,
}

impl SandwichPieces {
    /// `−b21 a11⁻¹ b21ᵀ + b22`, the covariance of `√n(ω̂ − ω)`.
    pub fn nuisance_covariance(&self) -> Result<Matrix4<f64>> {
        let l = linalg::cholesky(&self.a11)?;
        let solved = linalg::cholesky_solve(&l, &self.b21.transpose());
        let correction = &self.b21 * solved;
        let mut out = self.b22;
        for i in 0..4 {
            for j in 0..4 {
                out[(i, j)] -= 0.5 * (correction[(i, j)] + correction[(j, i)]);
            }
        }
        Ok((out + out.transpose()) * 0.5)
    }
}

/// Per-unit `ψ_ω` at the given propensities and `ω`.
pub fn omega_estimating_functions(
    dataset: &CausalDataset,
    fitted: &[f64],
    omega: &OmegaEstimate,
) -> Vec<[f64; 4]> {
    let [a1, b1, a0, b0] = omega.to_array();
    dataset
        .units()
        .iter()
        .zip(fitted)
        .map(|(u, &p)| {
            let (s, c) = u.theta.radians().sin_cos();
            let (g1, g0) = if u.treated {
                (1.0 / p, 0.0)
            } else {
                (0.0, 1.0 / (1.0 - p))
            };
            match omega.scheme {
                WeightScheme::HorvitzThompson => {
                    [g1 * c - a1, g1 * s - b1, g0 * c - a0, g0 * s - b0]
                }
                WeightScheme::Hajek => [g1 * (c - a1), g1 * (s - b1), g0 * (c - a0), g0 * (s - b0)],
            }
        })
        .collect()
}

/// Per-unit logistic score `(Aᵢ − π̂ᵢ) Xᵢ`.
pub fn eta_estimating_functions(dataset: &CausalDataset, fitted: &[f64]) -> Vec<Vec<f64>> {
    dataset
        .units()
        .iter()
        .zip(fitted)
        .map(|(u, &p)| {
            let r = f64::from(u8::from(u.treated)) - p;
            u.x.iter().map(|x| r * x).collect()
        })
        .collect()
}

/// Sample-average sandwich blocks at `(η̂, ω̂)`.
pub fn empirical_pieces(
    dataset: &CausalDataset,
    fit: &PropensityFit,
    omega: &OmegaEstimate,
) -> Result<SandwichPieces> {
    pieces_from_fitted(dataset, &fit.fitted, omega)
}

/// Same as [`empirical_pieces`] but from an explicit propensity vector.
pub fn pieces_from_fitted(
    dataset: &CausalDataset,
    fitted: &[f64],
    omega: &OmegaEstimate,
) -> Result<SandwichPieces> {
    if fitted.len() != dataset.len() {
        return Err(Error::Domain(format!(
            "{} propensities for {} units",
            fitted.len(),
            dataset.len()
        )));
    }
    let n = dataset.len();
    let k = dataset.n_covariates();
    let psi_w = omega_estimating_functions(dataset, fitted, omega);
    let psi_e = eta_estimating_functions(dataset, fitted);

    let mut a11 = DMatrix::<f64>::zeros(k, k);
    let mut b21 = DMatrix::<f64>::zeros(4, k);
    let mut b22 = Matrix4::<f64>::zeros();
    for ((u, &p), (w, e)) in dataset.units().iter().zip(fitted).zip(psi_w.iter().zip(&psi_e)) {
        let v = p * (1.0 - p);
        for i in 0..k {
            for j in 0..k {
                a11[(i, j)] += v * u.x[i] * u.x[j];
            }
        }
        for r in 0..4 {
            for j in 0..k {
                b21[(r, j)] += w[r] * e[j];
            }
            for s in 0..4 {
                b22[(r, s)] += w[r] * w[s];
            }
        }
    }
    let scale = 1.0 / n as f64;
    let pieces = SandwichPieces {
        a11: linalg::symmetrize(&(a11 * scale)),
        b21: b21 * scale,
        b22: b22 * scale,
        scheme: omega.scheme,
        n,
    };
    linalg::cholesky(&pieces.a11)?;
    Ok(pieces)
}

/// Jacobian of `ω ↦ (τ, ξ)`.
pub fn jacobian(omega: &OmegaEstimate) -> Result<Matrix2x4<f64>> {
    let [a1, b1, a0, b0] = omega.to_array();
    let r1 = a1.hypot(b1);
    let r0 = a0.hypot(b0);
    for length in [r1, r0] {
        if !(length >= EPS_RHO) {
            return Err(Error::UndefinedDirection { length });
        }
    }
    let (q1, q0) = (r1 * r1, r0 * r0);
    Ok(Matrix2x4::new(
        -b1 / q1,
        a1 / q1,
        b0 / q0,
        -a0 / q0,
        a1 / r1,
        b1 / r1,
        -a0 / r0,
        -b0 / r0,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectCovariance {
    /// Asymptotic covariance of `√n((τ̂, ξ̂) − (τ, ξ))`, row-major.
    pub sigma: [[f64; 2]; 2],
    pub se_tau: f64,
    pub se_xi: f64,
}

/// `Σ = J (−b21 a11⁻¹ b21ᵀ + b22) Jᵀ`, with standard errors `sqrt(Σᵢᵢ / n)`.
pub fn effect_covariance(pieces: &SandwichPieces, j: &Matrix2x4<f64>) -> Result<EffectCovariance> {
    let cov = pieces.nuisance_covariance()?;
    sigma_to_covariance(j * cov * j.transpose(), pieces.n)
}

fn sigma_to_covariance(sigma: Matrix2<f64>, n: usize) -> Result<EffectCovariance> {
    let sigma = (sigma + sigma.transpose()) * 0.5;
    for i in 0..2 {
        let d = sigma[(i, i)];
        if !(d >= -1e-10) {
            return Err(Error::Numerical(format!(
                "effect covariance has diagonal entry {d}"
            )));
        }
    }
    let se = |d: f64| (d.max(0.0) / n as f64).sqrt();
    Ok(EffectCovariance {
        sigma: [[sigma[(0, 0)], sigma[(0, 1)]], [sigma[(1, 0)], sigma[(1, 1)]]],
        se_tau: se(sigma[(0, 0)]),
        se_xi: se(sigma[(1, 1)]),
    })
}

/// Estimate `(τ, ξ)` under `scheme` and attach the sandwich covariance.
pub fn estimate_with_covariance(
    dataset: &CausalDataset,
    fit: &PropensityFit,
    scheme: WeightScheme,
) -> Result<(OmegaEstimate, EffectEstimate)> {
    let omega = estimate_omega(dataset, &fit.fitted, scheme)?;
    let mut effect = estimate_effects(&omega)?;
    let pieces = empirical_pieces(dataset, fit, &omega)?;
    let j = jacobian(&omega)?;
    effect.covariance = Some(effect_covariance(&pieces, &j)?);
    Ok((omega, effect))
}

/// Two-sided standard normal critical value for confidence `level`.
pub fn normal_critical_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level {level} not in (0, 1)")));
    }
    if level == 0.95 {
        return Ok(Z_95);
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 * (1.0 + level)))
}

/// Wald intervals. The `τ` interval is an arc and may extend past `±π`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldInterval {
    pub level: f64,
    pub z: f64,
    pub tau: f64,
    pub xi: f64,
    pub lo_tau: f64,
    pub hi_tau: f64,
    pub lo_xi: f64,
    pub hi_xi: f64,
    pub se_tau: f64,
    pub se_xi: f64,
}

impl WaldInterval {
    /// Whether the arc contains `true_tau`, judged on the circle.
    pub fn covers_tau(&self, true_tau: f64) -> bool {
        wrap_to_pi(self.tau - true_tau).abs() <= self.z * self.se_tau
    }

    pub fn covers_xi(&self, true_xi: f64) -> bool {
        self.lo_xi <= true_xi && true_xi <= self.hi_xi
    }
}

pub fn wald_interval(estimate: &EffectEstimate, level: f64) -> Result<WaldInterval> {
    let cov = estimate
        .covariance
        .ok_or_else(|| Error::Domain("estimate has no covariance attached".into()))?;
    let z = normal_critical_value(level)?;
    Ok(WaldInterval {
        level,
        z,
        tau: estimate.tau,
        xi: estimate.xi,
        lo_tau: estimate.tau - z * cov.se_tau,
        hi_tau: estimate.tau + z * cov.se_tau,
        lo_xi: estimate.xi - z * cov.se_xi,
        hi_xi: estimate.xi + z * cov.se_xi,
        se_tau: cov.se_tau,
        se_xi: cov.se_xi,
    })
}

/// Converts a 2×4 `nalgebra` matrix into nested rows.
pub fn jacobian_rows(j: &SMatrix<f64, 2, 4>) -> [[f64; 4]; 2] {
    let mut out = [[0.0; 4]; 2];
    for r in 0..2 {
        for c in 0..4 {
            out[r][c] = j[(r, c)];
        }
    }
    out
}
