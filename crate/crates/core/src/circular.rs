//! Angles on the unit circle and first trigonometric moments.
//!
//! All angles are counterclockwise radians. An [`Angle`] always holds its
//! canonical representative in `[0, 2π)`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resultant lengths below this are treated as having no direction.
pub const EPS_RHO: f64 = 1e-10;

/// An angle in radians, canonicalized into `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    /// Reduces `theta` modulo 2π. Fails for NaN or infinite input.
    pub fn new(theta: f64) -> Result<Angle> {
        if !theta.is_finite() {
            return Err(Error::Domain(format!("angle must be finite, got {theta}")));
        }
        let r = theta.rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU for tiny negative inputs
        Ok(Angle(if r >= TAU { 0.0 } else { r }))
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// Rotates counterclockwise by `delta` radians.
    pub fn rotate(self, delta: f64) -> Result<Angle> {
        Angle::new(self.0 + delta)
    }
}

impl TryFrom<f64> for Angle {
    type Error = Error;

    fn try_from(value: f64) -> Result<Angle> {
        Angle::new(value)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

/// Canonical representative of `theta` in `[0, 2π)`.
pub fn canonical_angle(theta: f64) -> Result<Angle> {
    Angle::new(theta)
}

/// Direction of the vector `(alpha, beta)` in `[0, 2π)`.
///
/// Note the argument order follows the usual `atan2(y, x)` convention.
pub fn atan2_circle(beta: f64, alpha: f64) -> Result<Angle> {
    let length = alpha.hypot(beta);
    if !length.is_finite() {
        return Err(Error::Domain(format!(
            "non-finite resultant components ({alpha}, {beta})"
        )));
    }
    if length < EPS_RHO {
        return Err(Error::UndefinedDirection { length });
    }
    Angle::new(beta.atan2(alpha))
}

/// Wraps an arbitrary real difference into `(−π, π]`.
pub fn wrap_to_pi(x: f64) -> f64 {
    let d = x.rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Signed shortest rotation taking `b` onto `a`, in `(−π, π]`.
///
/// Antipodal pairs return `+π`.
pub fn angular_difference(a: Angle, b: Angle) -> f64 {
    wrap_to_pi(a.0 - b.0)
}

/// First cosine and sine moment components `(α, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResultantVector {
    pub alpha: f64,
    pub beta: f64,
}

impl ResultantVector {
    pub fn new(alpha: f64, beta: f64) -> Self {
        ResultantVector { alpha, beta }
    }

    /// Mean resultant length `sqrt(α² + β²)`.
    pub fn length(&self) -> f64 {
        self.alpha.hypot(self.beta)
    }

    /// Mean direction; `UndefinedDirection` when the length is below [`EPS_RHO`].
    pub fn direction(&self) -> Result<Angle> {
        atan2_circle(self.beta, self.alpha)
    }
}

/// `α = Σ wᵢ cos θᵢ`, `β = Σ wᵢ sin θᵢ`. Weights need not sum to one.
pub fn weighted_trig_moment(angles: &[Angle], weights: &[f64]) -> Result<ResultantVector> {
    if angles.is_empty() {
        return Err(Error::Domain("trigonometric moment of an empty sample".into()));
    }
    if angles.len() != weights.len() {
        return Err(Error::Domain(format!(
            "{} angles but {} weights",
            angles.len(),
            weights.len()
        )));
    }
    let mut alpha = 0.0;
    let mut beta = 0.0;
    for (theta, &w) in angles.iter().zip(weights) {
        if !w.is_finite() {
            return Err(Error::Domain(format!("non-finite weight {w}")));
        }
        let (s, c) = theta.0.sin_cos();
        alpha += w * c;
        beta += w * s;
    }
    Ok(ResultantVector { alpha, beta })
}
