use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ContinuousStateSpace, StateSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    /// Zero-order hold: the input is constant between samples.
    Zoh,
    ForwardEuler,
}

/// Converts a continuous system to a discrete one with sample period `dt`.
///
/// ZOH exponentiates the augmented generator `[[A_c, B_c], [0, 0]] * dt`; its
/// top blocks are `exp(A_c dt)` and `int_0^dt exp(A_c s) ds B_c`, which equals
/// `A_c^{-1} (exp(A_c dt) - I) B_c` whenever `A_c` is invertible and needs no
/// invertibility otherwise.
pub fn discretize(
    csys: &ContinuousStateSpace,
    dt: f64,
    method: Discretization,
) -> Result<StateSpace> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sample period must be positive and finite, got {dt}"
        )));
    }
    let n = csys.state_dim();
    let m = csys.input_dim();
    let (a, b) = match method {
        Discretization::ForwardEuler => (
            DMatrix::identity(n, n) + csys.a() * dt,
            csys.b() * dt,
        ),
        Discretization::Zoh => {
            let mut gen = DMatrix::zeros(n + m, n + m);
            gen.view_mut((0, 0), (n, n)).copy_from(&(csys.a() * dt));
            gen.view_mut((0, n), (n, m)).copy_from(&(csys.b() * dt));
            let e = gen.exp();
            (
                e.view((0, 0), (n, n)).into_owned(),
                e.view((0, n), (n, m)).into_owned(),
            )
        }
    };
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("discretize"));
    }
    StateSpace::new(a, b, csys.c().clone())
}
