//! Horvitz–Thompson and Hájek weighting, the per-arm resultant vectors
//! `ω = (α⁽¹⁾, β⁽¹⁾, α⁽⁰⁾, β⁽⁰⁾)`, and the direction (ADTE) and length
//! (ALTE) effect estimates derived from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circular::{angular_difference, weighted_trig_moment, Angle, ResultantVector};
use crate::error::{Error, Result};
use crate::propensity::DesignRow;
use crate::variance::EffectCovariance;

/// One observed unit: treatment, covariates (intercept first), outcome angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub treated: bool,
    pub x: Vec<f64>,
    pub theta: Angle,
}

/// A validated observational sample with both arms present.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalDataset {
    units: Vec<Unit>,
}

impl CausalDataset {
    pub fn new(units: Vec<Unit>) -> Result<Self> {
        if units.len() < 2 {
            return Err(Error::DegenerateTreatment(format!(
                "need at least 2 units, got {}",
                units.len()
            )));
        }
        let k = units[0].x.len();
        for (i, u) in units.iter().enumerate() {
            if u.x.len() != k || k == 0 || u.x[0] != 1.0 {
                return Err(Error::Domain(format!(
                    "unit {i}: covariate vector must have length {k} with a leading 1"
                )));
            }
        }
        let n1 = units.iter().filter(|u| u.treated).count();
        if n1 == 0 || n1 == units.len() {
            return Err(Error::DegenerateTreatment(format!(
                "{n1} of {} units treated; both arms must be non-empty",
                units.len()
            )));
        }
        Ok(CausalDataset { units })
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn n_treated(&self) -> usize {
        self.units.iter().filter(|u| u.treated).count()
    }

    pub fn n_covariates(&self) -> usize {
        self.units[0].x.len()
    }

    pub fn design_rows(&self) -> Vec<DesignRow> {
        self.units
            .iter()
            .map(|u| DesignRow::new(u.x.clone(), u.treated))
            .collect()
    }

    pub fn angles(&self) -> Vec<Angle> {
        self.units.iter().map(|u| u.theta).collect()
    }

    /// Same units with every outcome rotated by `delta`.
    pub fn rotated(&self, delta: f64) -> Result<CausalDataset> {
        let units = self
            .units
            .iter()
            .map(|u| {
                Ok(Unit {
                    theta: u.theta.rotate(delta)?,
                    ..u.clone()
                })
            })
            .collect::<Result<_>>()?;
        Ok(CausalDataset { units })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WeightScheme {
    #[serde(rename = "HT")]
    HorvitzThompson,
    #[serde(rename = "Hajek")]
    Hajek,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 2] = [WeightScheme::HorvitzThompson, WeightScheme::Hajek];

    pub fn label(self) -> &'static str {
        match self {
            WeightScheme::HorvitzThompson => "HT",
            WeightScheme::Hajek => "Hajek",
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ht" | "horvitz-thompson" => Ok(WeightScheme::HorvitzThompson),
            "hajek" | "hájek" => Ok(WeightScheme::Hajek),
            _ => Err(Error::Config(format!("unknown weighting scheme '{s}'"))),
        }
    }
}

fn check_fitted(dataset: &CausalDataset, fitted: &[f64]) -> Result<()> {
    if fitted.len() != dataset.len() {
        return Err(Error::Domain(format!(
            "{} propensities for {} units",
            fitted.len(),
            dataset.len()
        )));
    }
    if let Some(p) = fitted.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::Domain(format!("propensity {p} outside (0, 1)")));
    }
    Ok(())
}

/// Horvitz–Thompson weights `Aᵢ/(nπ̂ᵢ)` and `(1−Aᵢ)/(n(1−π̂ᵢ))`.
pub fn ht_weights(dataset: &CausalDataset, fitted: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_fitted(dataset, fitted)?;
    let n = dataset.len() as f64;
    Ok(dataset
        .units()
        .iter()
        .zip(fitted)
        .map(|(u, &p)| {
            if u.treated {
                (1.0 / (n * p), 0.0)
            } else {
                (0.0, 1.0 / (n * (1.0 - p)))
            }
        })
        .unzip())
}

fn normalize(w: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Domain(format!(
            "arm weights sum to {total}; the arm is effectively empty"
        )));
    }
    let v: Vec<f64> = w.iter().map(|x| x / total).collect();
    let again: f64 = v.iter().sum();
    Ok(v.into_iter().map(|x| x / again).collect())
}

/// Hájek weights: each arm's HT weights rescaled to sum to one.
pub fn hajek_weights(w1: &[f64], w0: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((normalize(w1)?, normalize(w0)?))
}

/// Per-arm weights under `scheme`.
pub fn arm_weights(
    dataset: &CausalDataset,
    fitted: &[f64],
    scheme: WeightScheme,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (w1, w0) = ht_weights(dataset, fitted)?;
    match scheme {
        WeightScheme::HorvitzThompson => Ok((w1, w0)),
        WeightScheme::Hajek => hajek_weights(&w1, &w0),
    }
}

/// Weighted first trigonometric moments of both counterfactual arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaEstimate {
    pub treated: ResultantVector,
    pub control: ResultantVector,
    pub scheme: WeightScheme,
    pub n: usize,
}

impl OmegaEstimate {
    /// `(α⁽¹⁾, β⁽¹⁾, α⁽⁰⁾, β⁽⁰⁾)`.
    pub fn to_array(&self) -> [f64; 4] {
        [
            self.treated.alpha,
            self.treated.beta,
            self.control.alpha,
            self.control.beta,
        ]
    }

    pub fn from_array(w: [f64; 4], scheme: WeightScheme, n: usize) -> Self {
        OmegaEstimate {
            treated: ResultantVector::new(w[0], w[1]),
            control: ResultantVector::new(w[2], w[3]),
            scheme,
            n,
        }
    }
}

pub fn estimate_omega(
    dataset: &CausalDataset,
    fitted: &[f64],
    scheme: WeightScheme,
) -> Result<OmegaEstimate> {
    let (w1, w0) = arm_weights(dataset, fitted, scheme)?;
    let angles = dataset.angles();
    Ok(OmegaEstimate {
        treated: weighted_trig_moment(&angles, &w1)?,
        control: weighted_trig_moment(&angles, &w0)?,
        scheme,
        n: dataset.len(),
    })
}

/// Direction and length effects `(τ, ξ)` with optional covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    /// Average direction treatment effect, radians in `(−π, π]`.
    pub tau: f64,
    /// Average length treatment effect.
    pub xi: f64,
    pub scheme: WeightScheme,
    pub n: usize,
    pub covariance: Option<EffectCovariance>,
}

/// `τ = μ⁽¹⁾ − μ⁽⁰⁾` (wrapped) and `ξ = ρ⁽¹⁾ − ρ⁽⁰⁾`.
pub fn estimate_effects(omega: &OmegaEstimate) -> Result<EffectEstimate> {
    let mu1 = omega.treated.direction()?;
    let mu0 = omega.control.direction()?;
    Ok(EffectEstimate {
        tau: angular_difference(mu1, mu0),
        xi: omega.treated.length() - omega.control.length(),
        scheme: omega.scheme,
        n: omega.n,
        covariance: None,
    })
}
