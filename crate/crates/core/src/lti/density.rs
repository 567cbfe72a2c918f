//! Exact Gaussian densities of simulated data.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{unrolled_map, StateSpace, Trajectory};
use crate::environments::EnvironmentSpec;
use crate::linalg::gaussian_log_density;
use crate::{Error, Result};

/// Log-density of a trajectory under the hidden-Markov factorization
///
/// `log p(x_1 | x_0) + sum_t log p(x_{t+1} | x_t) + sum_{t=1..T} log p(y_t | x_t)`
///
/// with `x_{t+1} | x_t ~ N(A x_t + B mu, B Sigma_u B^T + q I)` and
/// `y_t | x_t ~ N(C x_t, r I)`. The initial state `x_0` is conditioned on.
pub fn trajectory_log_density(
    sys: &StateSpace,
    traj: &Trajectory,
    env: &EnvironmentSpec,
    process_noise_var: f64,
    obs_noise_var: f64,
) -> Result<f64> {
    let n = sys.state_dim();
    let p = sys.output_dim();
    if env.dim() != sys.input_dim() {
        return Err(Error::dim("trajectory_log_density: environment", sys.input_dim(), env.dim()));
    }
    if !(obs_noise_var > 0.0) {
        return Err(Error::SingularCovariance("observation model"));
    }
    if !(process_noise_var >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "process noise variance must be nonnegative, got {process_noise_var}"
        )));
    }
    let x = traj
        .x
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("trajectory carries no states".into()))?;
    let horizon = traj.horizon();
    if x.len() != horizon + 1 || traj.y.len() != horizon + 1 {
        return Err(Error::dim(
            "trajectory_log_density: lengths",
            format!("{} states and outputs", horizon + 1),
            format!("{} states, {} outputs", x.len(), traj.y.len()),
        ));
    }

    let b = sys.b();
    let transition_cov = b * DMatrix::from_diagonal(env.variances()) * b.transpose()
        + DMatrix::identity(n, n) * process_noise_var;
    if transition_cov.clone().cholesky().is_none() {
        return Err(Error::SingularCovariance("state transition"));
    }
    let drift = b * env.mean();
    let obs_cov = DMatrix::identity(p, p) * obs_noise_var;

    let mut total = 0.0;
    for t in 0..horizon {
        let mean = sys.a() * &x[t] + &drift;
        total += gaussian_log_density(&x[t + 1], &mean, &transition_cov)?;
        total += gaussian_log_density(&traj.y[t + 1], &(sys.c() * &x[t + 1]), &obs_cov)?;
    }
    Ok(total)
}

/// Change-of-variables density of `y = T_t u` with `u ~ N(0, Sigma_u^e)`:
///
/// `ln|det T_t^{-1}| + sum_i ln N((T_t^{-1} y)_i; 0, sigma_i^2)`.
///
/// Requires a square, invertible cumulative map `T_t`.
pub fn output_log_density(
    sys: &StateSpace,
    env: &EnvironmentSpec,
    t: usize,
    y: &DVector<f64>,
) -> Result<f64> {
    let (det, u) = pull_back(sys, env, t, y)?;
    let mut out = -det.abs().ln();
    for (ui, &var) in u.iter().zip(env.variances().iter()) {
        if !(var > 0.0) {
            return Err(Error::SingularCovariance("control covariance"));
        }
        out -= ui * ui / (2.0 * var) + 0.5 * var.ln() + 0.5 * (2.0 * PI).ln();
    }
    Ok(out)
}

/// `(det T_t, T_t^{-1} y)`.
fn pull_back(sys: &StateSpace, env: &EnvironmentSpec, t: usize, y: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    if sys.output_dim() != sys.input_dim() {
        return Err(Error::dim(
            "output_log_density",
            "d_y == d_u",
            format!("d_y = {}, d_u = {}", sys.output_dim(), sys.input_dim()),
        ));
    }
    if env.dim() != sys.input_dim() || y.len() != sys.output_dim() {
        return Err(Error::dim("output_log_density", sys.input_dim(), format!("{} / {}", env.dim(), y.len())));
    }
    let lu = unrolled_map(sys, t)?.lu();
    let det = lu.determinant();
    if !(det.abs() > 0.0) {
        return Err(Error::SingularCovariance("cumulative map T_t"));
    }
    let u = lu.solve(y).ok_or(Error::SingularCovariance("cumulative map T_t"))?;
    Ok((det, u))
}

/// Log-odds `q_{e,t}(y) = ln p_{e,t}(y) - ln p_{0,t}(y)` of environment `env`
/// against `base`.
///
/// Evaluated on `u = T_t^{-1} y` as
/// `-1/2 sum_i u_i^2 (1/sigma_{e,i}^2 - 1/sigma_{0,i}^2) - 1/2 sum_i ln(sigma_{e,i}^2 / sigma_{0,i}^2)`,
/// so the Jacobian term cancels exactly instead of numerically.
pub fn log_odds(
    sys: &StateSpace,
    env: &EnvironmentSpec,
    base: &EnvironmentSpec,
    t: usize,
    y: &DVector<f64>,
) -> Result<f64> {
    let u = pull_back(sys, env, t, y)?.1;
    if base.dim() != env.dim() {
        return Err(Error::dim("log_odds: base environment", env.dim(), base.dim()));
    }
    let mut out = 0.0;
    for ((ui, &ve), &v0) in u.iter().zip(env.variances().iter()).zip(base.variances().iter()) {
        if !(ve > 0.0 && v0 > 0.0) {
            return Err(Error::SingularCovariance("control covariance"));
        }
        out -= 0.5 * ui * ui * (1.0 / ve - 1.0 / v0) + 0.5 * (ve / v0).ln();
    }
    Ok(out)
}
