use anyhow::{bail, Result};
use lti_ident::linalg::{gaussian_matrix, spectral_radius, svd};
use lti_ident::lti::{validate_system, StateSpace};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Spectral radius of every sampled `A`.
pub const TARGET_SPECTRAL_RADIUS: f64 = 0.9;
/// Largest condition number of a sampled `B` or `C`.
pub const CONDITION_CAP: f64 = 100.0;
pub const MAX_ATTEMPTS: usize = 100;

/// Gaussian matrix whose singular values are clamped from below at
/// `sigma_max / CONDITION_CAP`.
fn capped_gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut f = svd(&gaussian_matrix(rows, cols, rng)).expect("finite Gaussian matrix");
    let floor = f.s.first().copied().unwrap_or(0.0) / CONDITION_CAP;
    f.s.iter_mut().for_each(|s| *s = s.max(floor));
    f.recompose()
}

/// Draws a random admissible (stable, controllable, observable) system.
///
/// `A` is Gaussian rescaled to spectral radius 0.9. `B` and `C` are the
/// (possibly rectangular) identity when flagged, otherwise Gaussian with
/// condition number at most 100. Draws are repeated until admissible.
pub fn sample_system(
    d_x: usize,
    d_u: usize,
    d_y: usize,
    b_identity: bool,
    c_identity: bool,
    seed: u64,
) -> Result<StateSpace> {
    if d_x == 0 || d_u == 0 || d_y == 0 {
        bail!("system dimensions must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let a = gaussian_matrix(d_x, d_x, &mut rng);
        let rho = spectral_radius(&a)?;
        let b = if b_identity {
            DMatrix::identity(d_x, d_u)
        } else {
            capped_gaussian(d_x, d_u, &mut rng)
        };
        let c = if c_identity {
            DMatrix::identity(d_y, d_x)
        } else {
            capped_gaussian(d_y, d_x, &mut rng)
        };
        if !(rho > 0.0) {
            continue;
        }
        let sys = StateSpace::new(a * (TARGET_SPECTRAL_RADIUS / rho), b, c)?;
        if validate_system(&sys)?.is_admissible() {
            return Ok(sys);
        }
    }
    bail!("no admissible {d_x}-state system after {MAX_ATTEMPTS} draws (seed {seed})")
}
