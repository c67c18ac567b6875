//! Causal effects on circular outcomes by inverse probability weighting.
//!
//! Two estimands compare the counterfactual outcome distributions of a
//! binary treatment: the average direction treatment effect `τ = μ⁽¹⁾ − μ⁽⁰⁾`
//! (shift of the mean direction) and the average length treatment effect
//! `ξ = ρ⁽¹⁾ − ρ⁽⁰⁾` (change of the mean resultant length). Both are estimated
//! from Horvitz–Thompson or Hájek weighted trigonometric moments with a
//! logistic propensity model, and come with sandwich standard errors.

pub mod circular;
pub mod error;
pub mod estimators;
pub mod io;
pub mod linalg;
pub mod propensity;
pub mod simulation;
pub mod variance;

pub use circular::{angular_difference, atan2_circle, canonical_angle, weighted_trig_moment, Angle, ResultantVector};
pub use error::{Error, ErrorKind, Result};
pub use estimators::{
    estimate_effects, estimate_omega, hajek_weights, ht_weights, CausalDataset, EffectEstimate,
    OmegaEstimate, Unit, WeightScheme,
};
pub use propensity::{fit_logistic, DesignRow, FitOptions, PropensityFit};
pub use simulation::{run_study, Scenario, ScenarioSpec, SimSummary};
pub use variance::{
    effect_covariance, empirical_pieces, estimate_with_covariance, jacobian, wald_interval,
    EffectCovariance, SandwichPieces, WaldInterval,
};
