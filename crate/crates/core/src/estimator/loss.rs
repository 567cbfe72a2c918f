//! Multi-environment Gaussian negative log-likelihood of a linear decoder.
//!
//! For a decoder `M = [M1 | M2]` and a pair `z_t = (y_{t+1}; y_t)` of
//! environment `e`, the reconstructed control is `u_hat = M z_t` (minus the
//! known control mean, if attached). The objective is
//!
//! ```text
//! sum_e sum_t [ 1/2 u_hat^T W_e u_hat + 1/2 log det(2 pi Sigma_e) ] - N log|det(M1 V)|
//! ```
//!
//! with `W_e = Sigma_e^{-1}` (or `Sigma_e` under [`Weighting::Covariance`]),
//! `N` the number of pairs and `V` the input subspace of the data (identity
//! for square systems, making the last term `N log|det M1|`).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::data::FitData;
use super::decoder::LinearDecoder;
use crate::{Error, Result};

/// Smallest `|det(M1 V)|` accepted by the likelihood.
pub const MIN_VOLUME: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `u^T Sigma^{-1} u`, the Gaussian log-density.
    Precision,
    /// `u^T Sigma u`, as literally written in the weighted least-squares form.
    Covariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Orthonormal rows from the sign-fixed QR of a Gaussian matrix.
    Orthogonal,
    /// i.i.d. `N(0, 1 / (2 d_y))` entries.
    ScaledGaussian,
}

/// Coordinates in which gradient descent runs. The objective and the
/// returned decoder do not depend on the choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioning {
    /// Descend on `M` directly.
    None,
    /// Descend on `M~` with `M = M~ S^{+1/2}`, `S` the pooled second moment
    /// of the training pairs.
    Whiten,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub grad_clip_norm: f64,
    pub init: Init,
    pub seed: u64,
    pub include_log_det: bool,
    pub weighting: Weighting,
    pub preconditioning: Preconditioning,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-3,
            batch_size: 64,
            epochs: 4000,
            grad_clip_norm: 0.5,
            init: Init::Orthogonal,
            seed: 0,
            include_log_det: true,
            weighting: Weighting::Precision,
            preconditioning: Preconditioning::Whiten,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        positive("learning_rate", self.learning_rate)?;
        positive("grad_clip_norm", self.grad_clip_norm)?;
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument(
                "batch_size and epochs must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Flattened pairs: row-major `z` (`n x 2 d_y`), per-pair control offsets and
/// weights (`n x d_u`).
pub(crate) struct Pairs {
    pub z: Vec<f64>,
    pub offset: Vec<f64>,
    pub weight: Vec<f64>,
    pub n: usize,
    pub zdim: usize,
    pub udim: usize,
    /// `sum over pairs of 1/2 log det(2 pi Sigma_e)`.
    pub normalizer: f64,
}

impl Pairs {
    pub fn new(data: &FitData, weighting: Weighting) -> Result<Self> {
        let p = data.output_dim();
        let m = data.input_dim();
        let n = data.num_pairs();
        let mut z = Vec::with_capacity(n * 2 * p);
        let mut offset = Vec::with_capacity(n * m);
        let mut weight = Vec::with_capacity(n * m);
        let mut normalizer = 0.0;
        for env in data.envs() {
            let prec = env.spec.precisions()?;
            let w = match weighting {
                Weighting::Precision => prec,
                Weighting::Covariance => env.spec.variances().clone(),
            };
            let log_norm: f64 = env
                .spec
                .variances()
                .iter()
                .map(|v| 0.5 * (2.0 * PI * v).ln())
                .sum();
            // With a known control mean the likelihood scores the uncentered
            // outputs against that mean.
            let (shift, mu) = match &env.control_mean {
                Some(mu) => (Some(&env.y_offset), mu.as_slice().to_vec()),
                None => (None, vec![0.0; m]),
            };
            for win in env.y.windows(2) {
                for half in [&win[1], &win[0]] {
                    for i in 0..p {
                        z.push(half[i] + shift.map_or(0.0, |s| s[i]));
                    }
                }
                offset.extend_from_slice(&mu);
                weight.extend_from_slice(w.as_slice());
                normalizer += log_norm;
            }
        }
        Ok(Self {
            z,
            offset,
            weight,
            n,
            zdim: 2 * p,
            udim: m,
            normalizer,
        })
    }

    /// Adds `1/2 sum r^T W r` over `indices` and, if requested, its gradient
    /// `sum W r z^T` into `grad` (row-major `d_u x 2 d_y`).
    pub fn quadratic(
        &self,
        m_rows: &[f64],
        indices: impl Iterator<Item = usize>,
        mut grad: Option<&mut [f64]>,
        scratch: &mut Vec<f64>,
    ) -> f64 {
        let (zd, ud) = (self.zdim, self.udim);
        scratch.resize(ud, 0.0);
        let mut total = 0.0;
        for k in indices {
            let z = &self.z[k * zd..(k + 1) * zd];
            let off = &self.offset[k * ud..(k + 1) * ud];
            let w = &self.weight[k * ud..(k + 1) * ud];
            for i in 0..ud {
                let row = &m_rows[i * zd..(i + 1) * zd];
                let mut r = -off[i];
                for j in 0..zd {
                    r += row[j] * z[j];
                }
                let wr = w[i] * r;
                total += 0.5 * wr * r;
                scratch[i] = wr;
            }
            if let Some(g) = grad.as_deref_mut() {
                for i in 0..ud {
                    let wr = scratch[i];
                    let grow = &mut g[i * zd..(i + 1) * zd];
                    for j in 0..zd {
                        grow[j] += wr * z[j];
                    }
                }
            }
        }
        total
    }
}

/// `log|det(M1 V)|` and its gradient with respect to `M1` (`d_u x d_y`).
pub(crate) fn log_volume(m1: &DMatrix<f64>, basis: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let x = m1 * basis;
    let lu = x.clone().lu();
    let det = lu.determinant();
    if !(det.abs() >= MIN_VOLUME) || !det.is_finite() {
        return Err(Error::DegenerateDecoder { det_abs: det.abs() });
    }
    let inv = lu
        .try_inverse()
        .ok_or(Error::DegenerateDecoder { det_abs: det.abs() })?;
    Ok((det.abs().ln(), inv.transpose() * basis.transpose()))
}

pub(crate) fn check_decoder(decoder: &LinearDecoder, data: &FitData) -> Result<()> {
    if decoder.input_dim() != data.input_dim() || decoder.output_dim() != data.output_dim() {
        return Err(Error::dim(
            "decoder",
            format!("{}x{}", data.input_dim(), 2 * data.output_dim()),
            format!("{}x{}", decoder.input_dim(), 2 * decoder.output_dim()),
        ));
    }
    Ok(())
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Total negative log-likelihood over all pairs of `data`.
pub fn negative_log_likelihood(decoder: &LinearDecoder, data: &FitData, cfg: &FitConfig) -> Result<f64> {
    Ok(nll_and_gradient(decoder, data, cfg)?.0)
}

/// Total negative log-likelihood and its gradient with respect to `M`.
pub fn nll_and_gradient(
    decoder: &LinearDecoder,
    data: &FitData,
    cfg: &FitConfig,
) -> Result<(f64, DMatrix<f64>)> {
    check_decoder(decoder, data)?;
    let pairs = Pairs::new(data, cfg.weighting)?;
    let m_rows = row_major(decoder.matrix());
    let mut grad = vec![0.0; m_rows.len()];
    let mut scratch = Vec::new();
    let quad = pairs.quadratic(&m_rows, 0..pairs.n, Some(&mut grad), &mut scratch);
    let mut grad = DMatrix::from_row_slice(pairs.udim, pairs.zdim, &grad);
    let mut total = quad + pairs.normalizer;
    if cfg.include_log_det {
        let (logdet, g1) = log_volume(&decoder.output_block(), data.input_subspace())?;
        let n = pairs.n as f64;
        total -= n * logdet;
        let mut head = grad.view_mut((0, 0), (pairs.udim, data.output_dim()));
        head -= g1 * n;
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("negative_log_likelihood"));
    }
    Ok((total, grad))
}
