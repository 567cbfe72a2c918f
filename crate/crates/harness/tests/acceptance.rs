//! End-to-end acceptance checks. Run with
//! `cargo test -p lti-ident-harness --test acceptance`; prints one line per
//! criterion and exits non-zero if any fails.

use std::time::Instant;

use lti_ident::environments::{generate_dataset, sample_random_design, variability_matrix, DatasetOptions, EnvironmentSpec};
use lti_ident::estimator::{negative_log_likelihood, nll_and_gradient, FitConfig, FitData, LinearDecoder};
use lti_ident::linalg::{condition_number, gaussian_log_density, gaussian_matrix};
use lti_ident::lti::{
    log_odds, markov_params, simulate, similarity_transform, trajectory_log_density, transfer_function, unrolled_map,
    StateSpace,
};
use lti_ident::metrics::{circle_samples, linear_sum_assignment, mcc};
use lti_ident::sysid::ho_kalman;
use lti_ident_harness::config::{DesignKind, ExperimentConfig, ExperimentKind};
use lti_ident_harness::{run_experiment, sample_system, ResultRow, RowStatus};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn val_mccs(rows: &[ResultRow]) -> Vec<f64> {
    rows.iter().map(|r| r.val_mcc.unwrap_or(f64::NAN)).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn table1_cell(d_u: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(ExperimentKind::Table1Cell);
    cfg.d_u = d_u;
    cfg.steps_per_env = 4000;
    cfg.fit.epochs = 800;
    cfg.seeds = vec![0, 1, 2];
    cfg
}

fn dc_motor() -> Outcome {
    let rows = run_experiment(&ExperimentConfig::preset(ExperimentKind::DcMotor)).expect("dc motor run");
    let mccs = val_mccs(&rows);
    let good = mccs.iter().filter(|&&m| m >= 0.99).count();
    outcome(good >= 4, format!("val MCC {mccs:.4?}, {good}/5 seeds >= 0.99"))
}

fn max_variability_cells(results: &mut Vec<(usize, f64)>) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (d_u, threshold) in [(2, 0.95), (3, 0.99)] {
        let rows = run_experiment(&table1_cell(d_u)).expect("max-variability run");
        let m = mean(&val_mccs(&rows));
        results.push((d_u, m));
        pass &= m >= threshold;
        detail.push(format!("d_u={d_u}: mean MCC {m:.4} (need >= {threshold})"));
    }
    outcome(pass, detail.join("; "))
}

fn trend(max_var_d3: f64) -> Outcome {
    let cfg = ExperimentConfig {
        design: DesignKind::RandomUniform,
        control_mean_nonzero: false,
        ..table1_cell(3)
    };
    let rows = run_experiment(&cfg).expect("random design run");
    let m = mean(&val_mccs(&rows));
    outcome(
        m < max_var_d3,
        format!("zero-mean random design {m:.4} < max-variability nonzero mean {max_var_d3:.4}"),
    )
}

fn noise_robustness() -> Outcome {
    let mut means = Vec::new();
    let mut complete = true;
    for noise in [0.0, 1e-2, 1.0] {
        let mut cfg = ExperimentConfig::preset(ExperimentKind::Table3Cell);
        cfg.obs_noise_var = noise;
        cfg.steps_per_env = 4000;
        cfg.fit.epochs = 800;
        match run_experiment(&cfg) {
            Ok(rows) => {
                complete &= rows.iter().all(|r| r.status == RowStatus::Ok);
                means.push(mean(&val_mccs(&rows)));
            }
            Err(_) => {
                complete = false;
                means.push(f64::NAN);
            }
        }
    }
    let gap = (means[1] - means[0]).abs();
    outcome(
        complete && gap <= 0.15,
        format!("mean MCC at noise 0, 1e-2, 1: {means:.4?}; gap {gap:.4} (need <= 0.15)"),
    )
}

fn rel_fro(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm()
}

fn max_tf_error(a: &StateSpace, b: &StateSpace, zs: &[Complex64]) -> f64 {
    zs.iter()
        .map(|&z| {
            let ha = transfer_function(a, z).unwrap();
            let hb = transfer_function(b, z).unwrap();
            (&ha - &hb).norm() / ha.norm()
        })
        .fold(0.0, f64::max)
}

fn ho_kalman_round_trip() -> Outcome {
    let zs = circle_samples(1.5, 32);
    let (mut worst_markov, mut worst_tf) = (0.0f64, 0.0f64);
    for k in 0..20u64 {
        let d = 1 + (k as usize % 8);
        let sys = sample_system(d, d, d, false, false, 1000 + k).unwrap();
        let horizon = 2 * d + 1;
        let mp = markov_params(&sys, horizon).unwrap();
        let rec = ho_kalman(&mp, d, d, d).unwrap();
        let back = markov_params(&rec.sys, horizon).unwrap();
        for (x, y) in mp.impulse().iter().zip(back.impulse()) {
            worst_markov = worst_markov.max(rel_fro(x, y));
        }
        worst_tf = worst_tf.max(max_tf_error(&sys, &rec.sys, &zs));
    }
    outcome(
        worst_markov <= 1e-8 && worst_tf <= 1e-7,
        format!("worst Markov error {worst_markov:.2e} (<= 1e-8), worst transfer error {worst_tf:.2e} (<= 1e-7)"),
    )
}

fn similarity_invariance() -> Outcome {
    let zs = circle_samples(1.5, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for k in 0..50u64 {
        let d = 1 + (k as usize % 6);
        let sys = sample_system(d, 1 + k as usize % 3, 1 + k as usize % 4, false, false, 2000 + k).unwrap();
        let p = loop {
            let p = gaussian_matrix(d, d, &mut rng);
            if condition_number(&p) <= 1e6 {
                break p;
            }
        };
        let moved = similarity_transform(&sys, &p).unwrap();
        worst = worst.max(max_tf_error(&sys, &moved, &zs));
    }
    outcome(worst <= 1e-9, format!("worst transfer error {worst:.2e} (<= 1e-9)"))
}

fn gradient_check() -> Outcome {
    let mut worst = 0.0f64;
    let cfg = FitConfig::default();
    for k in 0..10u64 {
        let d = [2, 3, 5][k as usize % 3];
        let mut rng = ChaCha8Rng::seed_from_u64(300 + k);
        let sys = sample_system(d, d, d, false, false, 3000 + k).unwrap();
        let specs = sample_random_design(d, d + 1, (0.1, 1.0), 40 + k).unwrap();
        let set = generate_dataset(&sys, &specs, &DatasetOptions::new(20, 1e-2, k)).unwrap();
        let data = FitData::from_trajectories(&set).unwrap();
        let dec = LinearDecoder::new(gaussian_matrix(d, 2 * d, &mut rng)).unwrap();
        let (_, grad) = nll_and_gradient(&dec, &data, &cfg).unwrap();
        let h = 1e-6;
        let fd = DMatrix::from_fn(d, 2 * d, |i, j| {
            let mut plus = dec.matrix().clone();
            plus[(i, j)] += h;
            let mut minus = dec.matrix().clone();
            minus[(i, j)] -= h;
            let lp = negative_log_likelihood(&LinearDecoder::new(plus).unwrap(), &data, &cfg).unwrap();
            let lm = negative_log_likelihood(&LinearDecoder::new(minus).unwrap(), &data, &cfg).unwrap();
            (lp - lm) / (2.0 * h)
        });
        worst = worst.max((&grad - &fd).norm() / grad.norm());
    }
    outcome(worst <= 1e-5, format!("worst relative gradient error {worst:.2e} (<= 1e-5)"))
}

fn brute_force_min(cost: &DMatrix<f64>) -> f64 {
    fn rec(cost: &DMatrix<f64>, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == cost.nrows() {
            *best = best.min(acc);
            return;
        }
        for j in 0..cost.ncols() {
            if !used[j] {
                used[j] = true;
                rec(cost, row + 1, used, acc + cost[(row, j)], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(cost, 0, &mut vec![false; cost.ncols()], 0.0, &mut best);
    best
}

fn mcc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0;
    for _ in 0..100 {
        let cost = gaussian_matrix(6, 6, &mut rng);
        let (perm, _) = linear_sum_assignment(&cost).unwrap();
        // Same summation order as the brute force.
        let got = perm.iter().enumerate().fold(0.0, |acc, (i, &j)| acc + cost[(i, j)]);
        if got != brute_force_min(&cost) {
            mismatches += 1;
        }
    }
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let d = rng.random_range(2..=6);
        let u: Vec<DVector<f64>> = (0..500).map(|_| gaussian_matrix(d, 1, &mut rng).column(0).into_owned()).collect();
        let mut perm: Vec<usize> = (0..d).collect();
        perm.shuffle(&mut rng);
        let scales: Vec<f64> = (0..d)
            .map(|_| rng.random_range(0.1..10.0) * if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let v: Vec<DVector<f64>> = u.iter().map(|x| DVector::from_fn(d, |i, _| scales[i] * x[perm[i]])).collect();
        worst = worst.max((mcc(&u, &v).unwrap().mcc - 1.0).abs());
    }
    outcome(
        mismatches == 0 && worst <= 1e-12,
        format!("{mismatches}/100 assignment mismatches; worst |MCC - 1| under D.P {worst:.1e}"),
    )
}

fn variability() -> Outcome {
    let mut worst = 100;
    for d_u in 1..=10 {
        let full = (0..100u64)
            .filter(|&s| {
                let specs = sample_random_design(d_u, d_u + 1, (0.1, 1.0), s).unwrap();
                variability_matrix(&specs).unwrap().satisfies_variability
            })
            .count();
        worst = worst.min(full);
    }
    outcome(worst >= 99, format!("fewest full-rank designs over d_u = 1..10: {worst}/100"))
}

/// Joint Gaussian of `(x_1, y_1, ..., x_T, y_T)` given `x_0`, built from the
/// stacked linear map of all noise sources.
fn joint_log_density(sys: &StateSpace, env: &EnvironmentSpec, x: &[DVector<f64>], y: &[DVector<f64>], q: f64, r: f64) -> f64 {
    let (n, p) = (sys.state_dim(), sys.output_dim());
    let t_len = x.len() - 1;
    let block = n + p;
    let dim = t_len * block;
    let src = t_len * n + t_len * p;
    let mut g = DMatrix::zeros(dim, src);
    let mut mean = DVector::zeros(dim);
    let mut powers = vec![DMatrix::identity(n, n)];
    for k in 1..=t_len {
        powers.push(sys.a() * &powers[k - 1]);
    }
    let drift = sys.b() * env.mean();
    for t in 1..=t_len {
        let mut mx = &powers[t] * &x[0];
        for s in 0..t {
            let f = &powers[t - 1 - s];
            mx += f * &drift;
            g.view_mut(((t - 1) * block, s * n), (n, n)).copy_from(f);
            g.view_mut(((t - 1) * block + n, s * n), (p, n)).copy_from(&(sys.c() * f));
        }
        g.view_mut(((t - 1) * block + n, t_len * n + (t - 1) * p), (p, p)).fill_with_identity();
        mean.rows_mut((t - 1) * block, n).copy_from(&mx);
        mean.rows_mut((t - 1) * block + n, p).copy_from(&(sys.c() * &mx));
    }
    let q_block = sys.b() * DMatrix::from_diagonal(env.variances()) * sys.b().transpose() + DMatrix::identity(n, n) * q;
    let mut sources = DMatrix::zeros(src, src);
    for s in 0..t_len {
        sources.view_mut((s * n, s * n), (n, n)).copy_from(&q_block);
    }
    for s in 0..t_len {
        let o = t_len * n + s * p;
        sources.view_mut((o, o), (p, p)).fill_diagonal(r);
    }
    let cov = &g * sources * g.transpose();
    let mut v = DVector::zeros(dim);
    for t in 1..=t_len {
        v.rows_mut((t - 1) * block, n).copy_from(&x[t]);
        v.rows_mut((t - 1) * block + n, p).copy_from(&y[t]);
    }
    gaussian_log_density(&v, &mean, &cov).unwrap()
}

fn density_factorization() -> Outcome {
    let mut worst = 0.0f64;
    for k in 0..10u64 {
        let sys = sample_system(2, 2, 2, false, false, 4000 + k).unwrap();
        let env = EnvironmentSpec::new(0, DVector::from_vec(vec![0.5, 1.5]), Some(DVector::from_vec(vec![0.3, -0.2]))).unwrap();
        let x0 = DVector::from_vec(vec![0.4, -1.0]);
        let traj = simulate(&sys, &env, 4, 0.05, Some(&x0), k).unwrap();
        let (q, r) = (0.1, 0.05);
        let fact = trajectory_log_density(&sys, &traj, &env, q, r).unwrap();
        let joint = joint_log_density(&sys, &env, traj.x.as_ref().unwrap(), &traj.y, q, r);
        worst = worst.max((fact - joint).abs());
    }
    outcome(worst <= 1e-8, format!("worst |factorized - joint| {worst:.2e} (<= 1e-8)"))
}

fn log_odds_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst, mut largest) = (0.0f64, 0.0f64);
    for k in 0..5u64 {
        let d = 2 + k as usize % 3;
        let sys = sample_system(d, d, d, false, false, 5000 + k).unwrap();
        let mut perm: Vec<usize> = (0..d).collect();
        perm.shuffle(&mut rng);
        let scales: Vec<f64> = (0..d).map(|_| rng.random_range(0.2..3.0)).collect();
        // B' = B P D: column j of B' is scales[j] * column perm[j] of B.
        let b2 = DMatrix::from_fn(d, d, |i, j| sys.b()[(i, perm[j])] * scales[j]);
        let sys2 = StateSpace::new(sys.a().clone(), b2, sys.c().clone()).unwrap();
        let specs = sample_random_design(d, d + 1, (0.1, 1.0), 60 + k).unwrap();
        // u' = D^{-1} P^T u has variances sigma_{perm[j]}^2 / scales[j]^2.
        let matched: Vec<EnvironmentSpec> = specs
            .iter()
            .map(|s| {
                let v = DVector::from_fn(d, |j, _| s.variances()[perm[j]] / (scales[j] * scales[j]));
                EnvironmentSpec::new(s.index(), v, None).unwrap()
            })
            .collect();
        for _ in 0..20 {
            // y drawn from the output distribution of a random environment.
            let t = rng.random_range(1..=6);
            let source = &specs[rng.random_range(0..specs.len())];
            let u = DVector::from_fn(d, |i, _| source.variances()[i].sqrt() * rng.sample::<f64, _>(StandardNormal));
            let y = unrolled_map(&sys, t).unwrap() * u;
            for e in 1..specs.len() {
                let a = log_odds(&sys, &specs[e], &specs[0], t, &y).unwrap();
                let b = log_odds(&sys2, &matched[e], &matched[0], t, &y).unwrap();
                worst = worst.max((a - b).abs());
                largest = largest.max(a.abs());
            }
        }
    }
    outcome(worst <= 1e-8, format!("worst log-odds difference {worst:.2e} (<= 1e-8) over 100 y, largest |q| {largest:.1}"))
}

fn main() {
    // Filtering by name (as `cargo test <filter>` does) skips the suite
    // unless the filter selects it.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let mut table1 = Vec::new();
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut record = |id: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "criterion {id:>2} [{}] {name}: {} ({secs:.1}s)",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail
        );
        results.push((id, name, out, secs));
    };
    record(1, "DC motor reproduction", &mut dc_motor);
    record(2, "max-variability cells", &mut || max_variability_cells(&mut table1));
    let max_var_d3 = table1.iter().find(|(d, _)| *d == 3).map_or(f64::NAN, |x| x.1);
    record(3, "design trend", &mut || trend(max_var_d3));
    record(4, "noise robustness", &mut noise_robustness);
    record(5, "Ho-Kalman round trip", &mut ho_kalman_round_trip);
    record(6, "similarity invariance", &mut similarity_invariance);
    record(7, "gradient correctness", &mut gradient_check);
    record(8, "MCC oracle", &mut mcc_oracle);
    record(9, "variability assumption", &mut variability);
    record(10, "density factorization", &mut density_factorization);
    record(11, "log-odds equivalence", &mut log_odds_equivalence);
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
