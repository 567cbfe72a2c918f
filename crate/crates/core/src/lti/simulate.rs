use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::StateSpace;
use crate::environments::EnvironmentSpec;
use crate::linalg::derive_seed;
use crate::{Error, Result};

/// One recorded trajectory of a single environment.
///
/// `u` has `T` entries, `y` has `T + 1` (`y_0 .. y_T`). States are present for
/// simulated data and absent for data loaded from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub env_index: usize,
    pub u: Vec<DVector<f64>>,
    pub x: Option<Vec<DVector<f64>>>,
    pub y: Vec<DVector<f64>>,
    pub seed: u64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.u.len()
    }
}

fn standard_normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Simulates `T` steps of `sys` driven by controls drawn from `env`.
///
/// Controls and observation noise come from two independent streams derived
/// from `seed`, so changing the noise level leaves the controls untouched.
/// `x0 = None` starts from the zero state.
pub fn simulate(
    sys: &StateSpace,
    env: &EnvironmentSpec,
    horizon: usize,
    obs_noise_var: f64,
    x0: Option<&DVector<f64>>,
    seed: u64,
) -> Result<Trajectory> {
    let n = sys.state_dim();
    let m = sys.input_dim();
    let p = sys.output_dim();
    if env.dim() != m {
        return Err(Error::dim("simulate: environment", m, env.dim()));
    }
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    if !(obs_noise_var >= 0.0 && obs_noise_var.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "observation noise variance must be nonnegative, got {obs_noise_var}"
        )));
    }
    let x0 = match x0 {
        Some(v) if v.len() != n => return Err(Error::dim("simulate: x0", n, v.len())),
        Some(v) => v.clone(),
        None => DVector::zeros(n),
    };

    let mut control_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let std = env.variances().map(f64::sqrt);
    let noise_std = obs_noise_var.sqrt();

    let mut u = Vec::with_capacity(horizon);
    let mut x = Vec::with_capacity(horizon + 1);
    let mut y = Vec::with_capacity(horizon + 1);

    let observe = |state: &DVector<f64>, rng: &mut ChaCha8Rng| {
        let mut out = sys.c() * state;
        if obs_noise_var > 0.0 {
            out += standard_normal_vector(rng, p) * noise_std;
        }
        out
    };

    y.push(observe(&x0, &mut noise_rng));
    x.push(x0);
    for t in 0..horizon {
        let ut = env.mean() + standard_normal_vector(&mut control_rng, m).component_mul(&std);
        let next = sys.a() * &x[t] + sys.b() * &ut;
        y.push(observe(&next, &mut noise_rng));
        x.push(next);
        u.push(ut);
    }

    Ok(Trajectory {
        env_index: env.index(),
        u,
        x: Some(x),
        y,
        seed,
    })
}
