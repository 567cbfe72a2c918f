use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::StateSpace;
use crate::linalg::{numerical_rank, spectral_radius};
use crate::Result;

/// Stability, controllability and observability of a discrete system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub spectral_radius: f64,
    pub is_stable: bool,
    pub controllability_rank: usize,
    pub observability_rank: usize,
    pub is_controllable: bool,
    pub is_observable: bool,
}

impl SystemReport {
    /// Stable, controllable and observable.
    pub fn is_admissible(&self) -> bool {
        self.is_stable && self.is_controllable && self.is_observable
    }
}

/// `[B, AB, ..., A^{n-1} B]`.
pub(crate) fn controllability_matrix(sys: &StateSpace) -> DMatrix<f64> {
    let n = sys.state_dim();
    let m = sys.input_dim();
    let mut out = DMatrix::zeros(n, n * m);
    let mut block = sys.b().clone();
    for k in 0..n {
        out.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = sys.a() * block;
    }
    out
}

/// `[C; CA; ...; CA^{n-1}]`.
pub(crate) fn observability_matrix(sys: &StateSpace) -> DMatrix<f64> {
    let n = sys.state_dim();
    let p = sys.output_dim();
    let mut out = DMatrix::zeros(n * p, n);
    let mut block = sys.c().clone();
    for k in 0..n {
        out.view_mut((k * p, 0), (p, n)).copy_from(&block);
        block *= sys.a();
    }
    out
}

pub fn validate_system(sys: &StateSpace) -> Result<SystemReport> {
    let n = sys.state_dim();
    let rho = spectral_radius(sys.a())?;
    let controllability_rank = numerical_rank(&controllability_matrix(sys));
    let observability_rank = numerical_rank(&observability_matrix(sys));
    Ok(SystemReport {
        spectral_radius: rho,
        is_stable: rho < 1.0,
        controllability_rank,
        observability_rank,
        is_controllable: controllability_rank == n,
        is_observable: observability_rank == n,
    })
}
