use nalgebra::DVector;
use rayon::prelude::*;

use super::{check_design, EnvironmentSpec};
use crate::linalg::{derive_seed, spectral_radius, Fingerprint};
use crate::lti::{simulate, StateSpace, Trajectory};
use crate::{Error, Result};

/// Recorded trajectories of every environment plus generation metadata.
///
/// Ground-truth controls are kept for evaluation only; the estimator consumes
/// [`crate::estimator::FitData`], which is built from outputs and specs alone.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub trajectories: Vec<Trajectory>,
    pub specs: Vec<EnvironmentSpec>,
    pub system_fingerprint: String,
    pub obs_noise_var: f64,
    pub horizon: usize,
    pub seed: u64,
}

impl TrajectorySet {
    pub fn input_dim(&self) -> usize {
        self.specs.first().map_or(0, EnvironmentSpec::dim)
    }

    pub fn output_dim(&self) -> usize {
        self.trajectories
            .first()
            .and_then(|t| t.y.first())
            .map_or(0, |y| y.len())
    }

    pub fn spec(&self, env_index: usize) -> Option<&EnvironmentSpec> {
        self.specs.iter().find(|s| s.index() == env_index)
    }

    /// Checks that every trajectory references a spec and that dimensions
    /// agree across environments.
    pub fn validate(&self) -> Result<()> {
        let d_u = check_design(&self.specs)?;
        let d_y = self.output_dim();
        for tr in &self.trajectories {
            if self.spec(tr.env_index).is_none() {
                return Err(Error::Format(format!(
                    "trajectory references unknown environment {}",
                    tr.env_index
                )));
            }
            if tr.u.len() != self.horizon || tr.y.len() != self.horizon + 1 {
                return Err(Error::dim(
                    "TrajectorySet: lengths",
                    format!("{} controls, {} outputs", self.horizon, self.horizon + 1),
                    format!("{} controls, {} outputs", tr.u.len(), tr.y.len()),
                ));
            }
            if tr.u.iter().any(|u| u.len() != d_u) || tr.y.iter().any(|y| y.len() != d_y) {
                return Err(Error::dim("TrajectorySet: vectors", format!("d_u = {d_u}, d_y = {d_y}"), "mixed"));
            }
        }
        Ok(())
    }

    /// SHA-256 over specs, metadata and every recorded control and output.
    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprint::new()
            .tag("TrajectorySet")
            .tag(&self.system_fingerprint)
            .scalars(&[self.obs_noise_var])
            .integer(self.horizon as u64)
            .integer(self.seed);
        for s in &self.specs {
            fp = fp
                .integer(s.index() as u64)
                .scalars(s.variances().as_slice())
                .scalars(s.mean().as_slice());
        }
        for tr in &self.trajectories {
            fp = fp.integer(tr.env_index as u64).integer(tr.seed);
            for v in tr.u.iter().chain(tr.y.iter()) {
                fp = fp.scalars(v.as_slice());
            }
        }
        fp.hex()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetOptions {
    pub steps_per_env: usize,
    pub obs_noise_var: f64,
    pub seed: u64,
    /// Initial state shared by all environments; zero when `None`.
    pub x0: Option<DVector<f64>>,
    pub allow_unstable: bool,
}

impl DatasetOptions {
    pub fn new(steps_per_env: usize, obs_noise_var: f64, seed: u64) -> Self {
        Self {
            steps_per_env,
            obs_noise_var,
            seed,
            x0: None,
            allow_unstable: false,
        }
    }
}

/// Simulates one trajectory per environment. Environment `e` uses the seed
/// derived from `(opts.seed, e)`, so generation runs in parallel and the
/// result does not depend on scheduling.
pub fn generate_dataset(
    sys: &StateSpace,
    specs: &[EnvironmentSpec],
    opts: &DatasetOptions,
) -> Result<TrajectorySet> {
    let d_u = check_design(specs)?;
    if d_u != sys.input_dim() {
        return Err(Error::dim("generate_dataset: design", sys.input_dim(), d_u));
    }
    if opts.steps_per_env == 0 {
        return Err(Error::InvalidArgument("steps_per_env must be positive".into()));
    }
    if !opts.allow_unstable {
        let rho = spectral_radius(sys.a())?;
        if !(rho < 1.0) {
            return Err(Error::Unstable {
                spectral_radius: rho,
            });
        }
    }
    let trajectories = specs
        .par_iter()
        .map(|spec| {
            simulate(
                sys,
                spec,
                opts.steps_per_env,
                opts.obs_noise_var,
                opts.x0.as_ref(),
                derive_seed(opts.seed, spec.index() as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectorySet {
        trajectories,
        specs: specs.to_vec(),
        system_fingerprint: sys.fingerprint(),
        obs_noise_var: opts.obs_noise_var,
        horizon: opts.steps_per_env,
        seed: opts.seed,
    })
}
