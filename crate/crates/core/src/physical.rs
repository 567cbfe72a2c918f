//! Physical example systems.

use nalgebra::{dmatrix, DMatrix};
use serde::{Deserialize, Serialize};

use crate::lti::ContinuousStateSpace;
use crate::{Error, Result};

/// Armature-controlled DC motor with states `(i, theta)` and voltage input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DcMotorParams {
    /// Armature resistance.
    pub r: f64,
    /// Armature inductance.
    pub l: f64,
    /// Electromotive force constant.
    pub k: f64,
    /// Rotor inertia.
    pub j: f64,
    /// Damping.
    pub d: f64,
}

impl Default for DcMotorParams {
    fn default() -> Self {
        Self { r: 1.0, l: 1.0, k: 1.0, j: 1.0, d: 1.0 }
    }
}

pub fn dc_motor(p: &DcMotorParams) -> Result<ContinuousStateSpace> {
    let values = [p.r, p.l, p.k, p.j, p.d];
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!("motor parameters must be positive: {p:?}")));
    }
    ContinuousStateSpace::new(
        dmatrix![-p.r / p.l, p.k / p.l; -p.k / p.j, -p.d / p.j],
        dmatrix![1.0 / p.l; 0.0],
        DMatrix::identity(2, 2),
    )
}
