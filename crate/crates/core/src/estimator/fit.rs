use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::data::FitData;
use super::decoder::LinearDecoder;
use super::loss::{check_decoder, log_volume, row_major, FitConfig, Init, Pairs, Preconditioning};
use crate::environments::variability_matrix;
use crate::linalg::{orthogonal_matrix, pinv};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Full-data loss of the initial decoder.
    pub initial_loss: f64,
    /// Full-data loss of the returned (best) decoder.
    pub final_loss: f64,
    /// Full-data loss after each epoch.
    pub loss_curve: Vec<f64>,
    pub epochs_run: usize,
    /// Epoch (1-based) whose decoder was returned; 0 means the initial one.
    pub best_epoch: usize,
    pub wall_time: f64,
}

/// Draws the initial decoder for `cfg.init` from `rng`.
fn initial_matrix(m: usize, p2: usize, cfg: &FitConfig, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let mat = match cfg.init {
        Init::Orthogonal => orthogonal_matrix(m, p2, rng),
        Init::ScaledGaussian => {
            let normal = Normal::new(0.0, (1.0 / p2 as f64).sqrt())
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            DMatrix::from_fn(m, p2, |_, _| normal.sample(rng))
        }
    };
    Ok(mat)
}

/// Fits a decoder from the configured initialization, drawn in the descent
/// coordinates.
///
/// With known nonzero control means the loss is no longer invariant under
/// row sign flips, and the volume barrier at `det(M_1 V) = 0` separates the
/// two orientations. Both are then descended and the lower loss is kept.
pub fn fit(data: &FitData, cfg: &FitConfig) -> Result<(LinearDecoder, FitReport)> {
    let first = run(data, cfg, None, false);
    let signed = data
        .envs()
        .iter()
        .any(|e| e.control_mean.as_ref().is_some_and(|m| m.iter().any(|&v| v != 0.0)));
    if !signed || !cfg.include_log_det {
        return first;
    }
    let second = run(data, cfg, None, true);
    match (first, second) {
        (Ok(a), Ok(b)) => {
            let wall_time = a.1.wall_time + b.1.wall_time;
            let (dec, mut report) = if b.1.final_loss < a.1.final_loss { b } else { a };
            report.wall_time = wall_time;
            Ok((dec, report))
        }
        (Ok(a), Err(_)) | (Err(_), Ok(a)) => Ok(a),
        (Err(e), Err(_)) => Err(e),
    }
}

/// Fits a decoder starting from `init`. The shuffling schedule still follows
/// `cfg.seed`.
pub fn fit_from(data: &FitData, cfg: &FitConfig, init: &LinearDecoder) -> Result<(LinearDecoder, FitReport)> {
    check_decoder(init, data)?;
    run(data, cfg, Some(init), false)
}

/// Relative eigenvalue threshold of the whitening pseudo-inverse root.
const WHITEN_RTOL: f64 = 1e-12;

/// Symmetric `S^{+1/2}` of the pooled pair second moment.
fn whitening(pairs: &Pairs) -> DMatrix<f64> {
    let zd = pairs.zdim;
    let mut s = DMatrix::zeros(zd, zd);
    for z in pairs.z.chunks(zd) {
        for i in 0..zd {
            for j in 0..=i {
                s[(i, j)] += z[i] * z[j];
            }
        }
    }
    s /= pairs.n.max(1) as f64;
    s.fill_upper_triangle_with_lower_triangle();
    let eig = SymmetricEigen::new(s);
    let top = eig.eigenvalues.amax();
    let roots = eig
        .eigenvalues
        .map(|l| if l > WHITEN_RTOL * top { 1.0 / l.sqrt() } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Loss in the descent coordinates `M~`, where `M = M~ W`.
struct Objective<'a> {
    /// Pairs with `z` replaced by `W z`.
    pairs: Pairs,
    whiten: Option<DMatrix<f64>>,
    basis: &'a DMatrix<f64>,
    include_log_det: bool,
    scratch: Vec<f64>,
}

impl Objective<'_> {
    fn to_decoder(&self, rows: &[f64]) -> DMatrix<f64> {
        let m = DMatrix::from_row_slice(self.pairs.udim, self.pairs.zdim, rows);
        match &self.whiten {
            Some(w) => m * w,
            None => m,
        }
    }

    /// Loss over `indices` with the volume term weighted by their count.
    /// When `grad` is given it receives the gradient (overwritten).
    fn eval(&mut self, rows: &[f64], indices: &[usize], grad: Option<&mut [f64]>) -> Result<f64> {
        let (ud, zd) = (self.pairs.udim, self.pairs.zdim);
        let p = zd / 2;
        let count = indices.len() as f64;
        let mut grad = grad;
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let mut loss = self.pairs.quadratic(rows, indices.iter().copied(), grad.as_deref_mut(), &mut self.scratch);
        if self.include_log_det {
            let m = self.to_decoder(rows);
            let (logdet, g1) = log_volume(&m.columns(0, p).into_owned(), self.basis)?;
            loss -= count * logdet;
            if let Some(g) = grad {
                let mut gm = DMatrix::zeros(ud, zd);
                gm.columns_mut(0, p).copy_from(&g1);
                // W is symmetric, so the chain rule multiplies by W on the right.
                if let Some(w) = &self.whiten {
                    gm *= w;
                }
                for i in 0..ud {
                    for j in 0..zd {
                        g[i * zd + j] -= count * gm[(i, j)];
                    }
                }
            }
        }
        Ok(loss)
    }

    fn full(&mut self, rows: &[f64], all: &[usize]) -> Result<f64> {
        Ok(self.eval(rows, all, None)? + self.pairs.normalizer)
    }
}

/// `flip` negates the first row of a drawn initialization.
fn run(
    data: &FitData,
    cfg: &FitConfig,
    init: Option<&LinearDecoder>,
    flip: bool,
) -> Result<(LinearDecoder, FitReport)> {
    let start = Instant::now();
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if data.envs().len() < 2 {
        return Err(Error::TooFewEnvironments {
            required: 2,
            actual: data.envs().len(),
        });
    }
    let diag = variability_matrix(&data.specs())?;
    if !diag.satisfies_variability {
        log::warn!(
            "design has column rank {} < {}; the decoder is not identifiable up to permutation and scale",
            diag.column_rank,
            data.input_dim()
        );
    }

    let mut pairs = Pairs::new(data, cfg.weighting)?;
    let whiten = match cfg.preconditioning {
        Preconditioning::None => None,
        Preconditioning::Whiten => {
            let w = whitening(&pairs);
            let zd = pairs.zdim;
            for z in pairs.z.chunks_mut(zd) {
                let wz = &w * DVector::from_column_slice(z);
                z.copy_from_slice(wz.as_slice());
            }
            Some(w)
        }
    };
    // A warm start maps to M~ = M W^+, which reproduces M on the span of
    // the data.
    let init_rows = match (init, &whiten) {
        (Some(d), Some(w)) => row_major(&(d.matrix() * pinv(w))),
        (Some(d), None) => row_major(d.matrix()),
        (None, _) => {
            let mut m = initial_matrix(pairs.udim, pairs.zdim, cfg, &mut rng)?;
            if flip {
                m.row_mut(0).neg_mut();
            }
            row_major(&m)
        }
    };
    let mut obj = Objective {
        pairs,
        whiten,
        basis: data.input_subspace(),
        include_log_det: cfg.include_log_det,
        scratch: Vec::new(),
    };
    let n = obj.pairs.n;
    let all: Vec<usize> = (0..n).collect();
    let mut order = all.clone();
    let mut m_rows = init_rows;
    let mut grad = vec![0.0; m_rows.len()];

    let initial_loss = obj.full(&m_rows, &all)?;
    if !initial_loss.is_finite() {
        return Err(Error::Diverged { epoch: 0 });
    }
    let mut best = (initial_loss, m_rows.clone(), 0);
    let mut loss_curve = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            obj.eval(&m_rows, batch, Some(&mut grad))?;
            let scale = 1.0 / batch.len() as f64;
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt() * scale;
            if !norm.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            let step = cfg.learning_rate * scale * clip_factor(norm, cfg.grad_clip_norm);
            for (w, g) in m_rows.iter_mut().zip(&grad) {
                *w -= step * g;
            }
        }
        let loss = match obj.full(&m_rows, &all) {
            Ok(l) if l.is_finite() => l,
            Ok(_) | Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch }),
            Err(e) => return Err(e),
        };
        loss_curve.push(loss);
        if loss < best.0 {
            best = (loss, m_rows.clone(), epoch);
        }
    }

    let (final_loss, rows, best_epoch) = best;
    let decoder = LinearDecoder::new(obj.to_decoder(&rows))?;
    let report = FitReport {
        initial_loss,
        final_loss,
        epochs_run: loss_curve.len(),
        loss_curve,
        best_epoch,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((decoder, report))
}

fn clip_factor(norm: f64, max_norm: f64) -> f64 {
    if norm > max_norm {
        max_norm / norm
    } else {
        1.0
    }
}
