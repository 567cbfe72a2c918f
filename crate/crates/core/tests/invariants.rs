use lti_ident::linalg::{condition_number, gaussian_matrix, spectral_radius};
use lti_ident::lti::{markov_params, similarity_transform, simulate, transfer_function, StateSpace};
use lti_ident::environments::EnvironmentSpec;
use lti_ident::metrics::circle_samples;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random system with spectral radius `rho`.
fn random_system(n: usize, m: usize, p: usize, rho: f64, seed: u64) -> StateSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = gaussian_matrix(n, n, &mut rng);
    let r = spectral_radius(&a).unwrap();
    StateSpace::new(
        a * (rho / r),
        gaussian_matrix(n, m, &mut rng),
        gaussian_matrix(p, n, &mut rng),
    )
    .unwrap()
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn similarity_preserves_transfer_function(
        n in 1usize..6, m in 1usize..4, p in 1usize..4, seed in any::<u64>()
    ) {
        let sys = random_system(n, m, p, 0.9, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let t = gaussian_matrix(n, n, &mut rng);
        prop_assume!(condition_number(&t) <= 1e6);
        let moved = similarity_transform(&sys, &t).unwrap();
        for z in circle_samples(1.5, 32) {
            let h = transfer_function(&sys, z).unwrap();
            let hp = transfer_function(&moved, z).unwrap();
            prop_assert!((&hp - &h).norm() <= 1e-9 * h.norm());
        }
    }

    #[test]
    fn similarity_preserves_markov_blocks(n in 1usize..6, seed in any::<u64>()) {
        let sys = random_system(n, 2, 3, 0.9, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let t = gaussian_matrix(n, n, &mut rng);
        prop_assume!(condition_number(&t) <= 1e3);
        let a = markov_params(&sys, 8).unwrap();
        let b = markov_params(&similarity_transform(&sys, &t).unwrap(), 8).unwrap();
        for (x, y) in a.impulse().iter().zip(b.impulse()) {
            prop_assert!((x - y).amax() <= 1e-10);
        }
    }

    #[test]
    fn markov_series_converges_to_resolvent(n in 1usize..5, seed in any::<u64>()) {
        let sys = random_system(n, 2, 2, 0.8, seed);
        let ratio: f64 = 0.8 / 1.5;
        // Smallest K with tail bound ratio^K / (1 - ratio) below 1e-10.
        let k = ((1e-10 * (1.0 - ratio)).ln() / ratio.ln()).ceil() as usize;
        let mp = markov_params(&sys, k + 1).unwrap();
        for z in circle_samples(1.5, 8) {
            let mut series = DMatrix::<Complex64>::zeros(2, 2);
            let mut zpow = Complex64::new(1.0, 0.0);
            for block in mp.impulse() {
                zpow /= z;
                series += to_complex(block) * zpow;
            }
            let h = transfer_function(&sys, z).unwrap();
            prop_assert!((&series - &h).norm() <= 1e-8 * h.norm());
        }
    }

    #[test]
    fn simulation_is_bit_reproducible(seed in any::<u64>(), steps in 1usize..50) {
        let sys = random_system(3, 2, 2, 0.9, 5);
        let env = EnvironmentSpec::new(0, DVector::from_vec(vec![0.5, 2.0]), Some(DVector::from_vec(vec![1.0, -1.0]))).unwrap();
        let a = simulate(&sys, &env, steps, 0.1, None, seed).unwrap();
        let b = simulate(&sys, &env, steps, 0.1, None, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

/// Discrete Lyapunov solution of `S = A S A^T + Q` via the Kronecker form.
fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let kron = a.kronecker(a);
    let lhs = DMatrix::identity(n * n, n * n) - kron;
    let vec_q = DVector::from_column_slice(q.as_slice());
    let s = lhs.lu().solve(&vec_q).unwrap();
    DMatrix::from_column_slice(n, n, s.as_slice())
}

#[test]
fn stationary_state_covariance_matches_lyapunov() {
    let sys = random_system(3, 2, 3, 0.7, 21);
    let env = EnvironmentSpec::new(0, DVector::from_vec(vec![0.4, 1.1]), None).unwrap();
    let traj = simulate(&sys, &env, 200_000, 0.0, None, 8).unwrap();
    let x = traj.x.unwrap();
    let burn = 1000;
    let mut cov = DMatrix::zeros(3, 3);
    for xt in &x[burn..] {
        cov += xt * xt.transpose();
    }
    cov /= (x.len() - burn) as f64;
    let q = sys.b() * DMatrix::from_diagonal(env.variances()) * sys.b().transpose();
    let oracle = lyapunov(sys.a(), &q);
    assert!((&cov - &oracle).norm() <= 0.05 * oracle.norm(), "{cov} vs {oracle}");
}
