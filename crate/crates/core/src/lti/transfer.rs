use nalgebra::DMatrix;
use num_complex::Complex64;

use super::StateSpace;
use crate::linalg::{complex_singular_values, condition_number};
use crate::{Error, Result};

/// Largest condition number accepted for a similarity transformation.
pub const DEFAULT_TRANSFORM_CONDITION_CAP: f64 = 1e12;

fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// `H(z) = C (zI - A)^{-1} B`.
pub fn transfer_function(sys: &StateSpace, z: Complex64) -> Result<DMatrix<Complex64>> {
    let n = sys.state_dim();
    let resolvent = DMatrix::<Complex64>::identity(n, n) * z - complexify(sys.a());
    let sv = complex_singular_values(&resolvent);
    let (min, max) = sv
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if !(min > 1e-14 * max.max(1.0)) {
        return Err(Error::Pole { z });
    }
    let x = resolvent
        .lu()
        .solve(&complexify(sys.b()))
        .ok_or(Error::Pole { z })?;
    Ok(complexify(sys.c()) * x)
}

/// `(P A P^{-1}, P B, C P^{-1})` with the default condition cap.
pub fn similarity_transform(sys: &StateSpace, p: &DMatrix<f64>) -> Result<StateSpace> {
    similarity_transform_with_cap(sys, p, DEFAULT_TRANSFORM_CONDITION_CAP)
}

pub fn similarity_transform_with_cap(
    sys: &StateSpace,
    p: &DMatrix<f64>,
    condition_cap: f64,
) -> Result<StateSpace> {
    let n = sys.state_dim();
    if p.shape() != (n, n) {
        return Err(Error::dim(
            "similarity_transform",
            format!("{n}x{n}"),
            format!("{}x{}", p.nrows(), p.ncols()),
        ));
    }
    let condition = condition_number(p);
    if !(condition <= condition_cap) {
        return Err(Error::SingularTransform {
            condition,
            cap: condition_cap,
        });
    }
    let p_inv = p
        .clone()
        .try_inverse()
        .ok_or(Error::SingularTransform {
            condition,
            cap: condition_cap,
        })?;
    StateSpace::new(p * sys.a() * &p_inv, p * sys.b(), sys.c() * &p_inv)
}
