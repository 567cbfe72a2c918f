use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::environments::{EnvironmentSpec, TrajectorySet};
use crate::linalg::{pinv, Fingerprint};
use crate::{Error, Result};

/// Observations of one environment as seen by the estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvData {
    pub spec: EnvironmentSpec,
    /// Outputs `y_0 ..= y_T`, possibly centered.
    pub y: Vec<DVector<f64>>,
    /// Total shift removed from `y` by centering.
    pub y_offset: DVector<f64>,
    /// Known control mean. When present the likelihood scores
    /// `M (y_{t+1} + o; y_t + o) - mean`, i.e. the mean enters the objective
    /// instead of being discarded by centering.
    pub control_mean: Option<DVector<f64>>,
}

impl EnvData {
    pub fn num_pairs(&self) -> usize {
        self.y.len().saturating_sub(1)
    }
}

/// Multi-environment outputs plus the environment specs: everything the
/// estimator may look at. There is deliberately no way to reach the recorded
/// controls from here.
#[derive(Debug, Clone, PartialEq)]
pub struct FitData {
    envs: Vec<EnvData>,
    input_dim: usize,
    output_dim: usize,
    /// Orthonormal basis (`d_y x d_u`) of the directions in which `y_{t+1}`
    /// varies given `y_t`. Identity when `d_y == d_u`.
    input_subspace: DMatrix<f64>,
}

impl FitData {
    pub fn new(envs: Vec<EnvData>) -> Result<Self> {
        let first = envs
            .first()
            .ok_or(Error::TooFewEnvironments { required: 1, actual: 0 })?;
        let input_dim = first.spec.dim();
        let output_dim = first.y.first().map_or(0, |y| y.len());
        if output_dim < input_dim {
            return Err(Error::dim(
                "FitData: decoding controls from outputs needs d_y >= d_u",
                format!(">= {input_dim}"),
                output_dim,
            ));
        }
        for env in &envs {
            if env.spec.dim() != input_dim {
                return Err(Error::dim("FitData: environment", input_dim, env.spec.dim()));
            }
            if env.y.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "environment {} needs at least two outputs",
                    env.spec.index()
                )));
            }
            if env.y.iter().any(|y| y.len() != output_dim) || env.y_offset.len() != output_dim {
                return Err(Error::dim("FitData: outputs", output_dim, "mixed"));
            }
            if env.control_mean.as_ref().is_some_and(|m| m.len() != input_dim) {
                return Err(Error::dim("FitData: control mean", input_dim, "other"));
            }
        }
        let mut data = Self {
            envs,
            input_dim,
            output_dim,
            input_subspace: DMatrix::identity(output_dim, input_dim),
        };
        if output_dim > input_dim {
            data.input_subspace = data.estimate_input_subspace();
        }
        Ok(data)
    }

    /// Fitting view of a dataset: outputs and specs only.
    pub fn from_trajectories(set: &TrajectorySet) -> Result<Self> {
        let envs = set
            .trajectories
            .iter()
            .map(|tr| {
                let spec = set.spec(tr.env_index).ok_or_else(|| {
                    Error::Format(format!("no spec for environment {}", tr.env_index))
                })?;
                Ok(EnvData {
                    spec: spec.clone(),
                    y: tr.y.clone(),
                    y_offset: DVector::zeros(tr.y.first().map_or(0, |y| y.len())),
                    control_mean: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(envs)
    }

    pub fn envs(&self) -> &[EnvData] {
        &self.envs
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn input_subspace(&self) -> &DMatrix<f64> {
        &self.input_subspace
    }

    pub fn num_pairs(&self) -> usize {
        self.envs.iter().map(EnvData::num_pairs).sum()
    }

    pub fn specs(&self) -> Vec<EnvironmentSpec> {
        self.envs.iter().map(|e| e.spec.clone()).collect()
    }

    /// SHA-256 over specs and outputs.
    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprint::new().tag("FitData");
        for env in &self.envs {
            fp = fp
                .integer(env.spec.index() as u64)
                .scalars(env.spec.variances().as_slice())
                .scalars(env.y_offset.as_slice());
            if let Some(m) = &env.control_mean {
                fp = fp.scalars(m.as_slice());
            }
            for y in &env.y {
                fp = fp.scalars(y.as_slice());
            }
        }
        fp.hex()
    }

    /// Splits every environment at [`validation_cut`]. The two halves share
    /// the boundary output.
    pub fn split(&self, validation_fraction: f64) -> Result<(FitData, FitData)> {
        let mut train = Vec::with_capacity(self.envs.len());
        let mut val = Vec::with_capacity(self.envs.len());
        for env in &self.envs {
            let cut = validation_cut(env.num_pairs(), validation_fraction)?;
            train.push(EnvData {
                y: env.y[..=cut].to_vec(),
                ..env.clone()
            });
            val.push(EnvData {
                y: env.y[cut..].to_vec(),
                ..env.clone()
            });
        }
        let keep = |envs| -> Result<FitData> {
            let mut d = FitData::new(envs)?;
            d.input_subspace = self.input_subspace.clone();
            Ok(d)
        };
        Ok((keep(train)?, keep(val)?))
    }

    /// Regress `y_{t+1}` on `y_t` (per-environment centered, pooled) and take
    /// the leading `d_u` principal directions of the residual.
    fn estimate_input_subspace(&self) -> DMatrix<f64> {
        let p = self.output_dim;
        let mut s00 = DMatrix::zeros(p, p);
        let mut s10 = DMatrix::zeros(p, p);
        let mut s11 = DMatrix::zeros(p, p);
        for env in &self.envs {
            let n = env.num_pairs() as f64;
            let m0 = env.y[..env.y.len() - 1].iter().fold(DVector::zeros(p), |a, y| a + y) / n;
            let m1 = env.y[1..].iter().fold(DVector::zeros(p), |a, y| a + y) / n;
            for w in env.y.windows(2) {
                let a = &w[0] - &m0;
                let b = &w[1] - &m1;
                s00 += &a * a.transpose();
                s10 += &b * a.transpose();
                s11 += &b * b.transpose();
            }
        }
        let gain = &s10 * pinv(&s00);
        let resid = &s11 - &gain * s10.transpose();
        let resid = (&resid + resid.transpose()) * 0.5;
        let eig = SymmetricEigen::new(resid);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut basis = DMatrix::zeros(p, self.input_dim);
        for (j, &k) in order.iter().take(self.input_dim).enumerate() {
            basis.set_column(j, &eig.eigenvectors.column(k));
        }
        basis
    }
}

/// Index of the first held-out pair when the final `validation_fraction` of
/// `pairs` is reserved (rounded, at least one pair).
pub fn validation_cut(pairs: usize, validation_fraction: f64) -> Result<usize> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction must lie in (0, 1), got {validation_fraction}"
        )));
    }
    let n_val = ((pairs as f64 * validation_fraction).round() as usize).max(1);
    if n_val >= pairs {
        return Err(Error::InvalidArgument(format!("cannot hold out {n_val} of {pairs} pairs")));
    }
    Ok(pairs - n_val)
}

/// What [`center`] removed from one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanRecord {
    pub env_index: usize,
    /// Empirical output mean subtracted by this call.
    pub output_mean: DVector<f64>,
    /// Known control mean attached to the environment, if any.
    pub control_mean: Option<DVector<f64>>,
}

/// Subtracts each environment's empirical output mean. Known control means,
/// when given (one per environment, in order), are attached so the likelihood
/// centers the reconstructed controls with them. Idempotent up to round-off.
pub fn center(
    data: &FitData,
    known_control_means: Option<&[DVector<f64>]>,
) -> Result<(FitData, Vec<MeanRecord>)> {
    if let Some(means) = known_control_means {
        if means.len() != data.envs.len() {
            return Err(Error::dim("center: control means", data.envs.len(), means.len()));
        }
    }
    let p = data.output_dim;
    let mut envs = Vec::with_capacity(data.envs.len());
    let mut records = Vec::with_capacity(data.envs.len());
    for (k, env) in data.envs.iter().enumerate() {
        let mean = env.y.iter().fold(DVector::zeros(p), |a, y| a + y) / env.y.len() as f64;
        let control_mean = match known_control_means {
            Some(means) => Some(means[k].clone()),
            None => env.control_mean.clone(),
        };
        records.push(MeanRecord {
            env_index: env.spec.index(),
            output_mean: mean.clone(),
            control_mean: control_mean.clone(),
        });
        envs.push(EnvData {
            spec: env.spec.clone(),
            y: env.y.iter().map(|y| y - &mean).collect(),
            y_offset: &env.y_offset + &mean,
            control_mean,
        });
    }
    let mut out = FitData::new(envs)?;
    out.input_subspace = data.input_subspace.clone();
    Ok((out, records))
}
