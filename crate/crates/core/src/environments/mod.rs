//! Intervention designs: per-environment diagonal control covariances, the
//! environment variability matrix, and multi-environment dataset generation.

mod dataset;
mod io;

pub use dataset::{generate_dataset, DatasetOptions, TrajectorySet};
pub use io::{load_dataset, save_dataset, DATASET_SCHEMA_VERSION};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{numerical_rank, singular_values};
use crate::{Error, Result};

/// Control distribution of one environment: `u_t ~ N(mean, diag(variances))`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    index: usize,
    variances: DVector<f64>,
    mean: DVector<f64>,
}

impl EnvironmentSpec {
    /// `mean = None` gives a zero-mean control. Variances must be finite and
    /// nonnegative; a zero variance is a deterministic control component and
    /// is rejected by everything that needs the precision matrix.
    pub fn new(index: usize, variances: DVector<f64>, mean: Option<DVector<f64>>) -> Result<Self> {
        if variances.is_empty() {
            return Err(Error::InvalidArgument("environment needs at least one control".into()));
        }
        if variances.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "variances must be finite and nonnegative, got {:?}",
                variances.as_slice()
            )));
        }
        let mean = mean.unwrap_or_else(|| DVector::zeros(variances.len()));
        if mean.len() != variances.len() {
            return Err(Error::dim("EnvironmentSpec: mean", variances.len(), mean.len()));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("EnvironmentSpec: mean"));
        }
        Ok(Self {
            index,
            variances,
            mean,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn dim(&self) -> usize {
        self.variances.len()
    }

    pub fn variances(&self) -> &DVector<f64> {
        &self.variances
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn has_positive_variances(&self) -> bool {
        self.variances.iter().all(|&v| v > 0.0)
    }

    pub fn with_mean(mut self, mean: DVector<f64>) -> Result<Self> {
        if mean.len() != self.dim() {
            return Err(Error::dim("EnvironmentSpec::with_mean", self.dim(), mean.len()));
        }
        self.mean = mean;
        Ok(self)
    }

    /// Diagonal of `(Sigma_u^e)^{-1}`.
    pub fn precisions(&self) -> Result<DVector<f64>> {
        if !self.has_positive_variances() {
            return Err(Error::InvalidArgument(format!(
                "environment {} has a zero variance; precision undefined",
                self.index
            )));
        }
        Ok(self.variances.map(|v| 1.0 / v))
    }
}

/// Environment variability matrix and its rank/conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignDiagnostics {
    /// Rows `e = 1..E-1`: `1 / sigma_{e,i}^2 - 1 / sigma_{0,i}^2`.
    pub delta: DMatrix<f64>,
    pub column_rank: usize,
    /// `sigma_max / sigma_min` of `delta`; infinite when column-rank deficient.
    pub condition_number: f64,
    pub satisfies_variability: bool,
}

fn check_design(specs: &[EnvironmentSpec]) -> Result<usize> {
    let d_u = specs
        .first()
        .map(EnvironmentSpec::dim)
        .ok_or(Error::TooFewEnvironments { required: 1, actual: 0 })?;
    if let Some(s) = specs.iter().find(|s| s.dim() != d_u) {
        return Err(Error::dim("design", d_u, s.dim()));
    }
    Ok(d_u)
}

/// Builds `Delta` relative to the first spec (the base environment).
pub fn variability_matrix(specs: &[EnvironmentSpec]) -> Result<DesignDiagnostics> {
    if specs.len() < 2 {
        return Err(Error::TooFewEnvironments {
            required: 2,
            actual: specs.len(),
        });
    }
    let d_u = check_design(specs)?;
    let base = specs[0].precisions()?;
    let mut delta = DMatrix::zeros(specs.len() - 1, d_u);
    for (row, spec) in specs[1..].iter().enumerate() {
        let prec = spec.precisions()?;
        for i in 0..d_u {
            delta[(row, i)] = prec[i] - base[i];
        }
    }
    let column_rank = numerical_rank(&delta);
    let satisfies_variability = column_rank == d_u;
    let condition_number = if satisfies_variability {
        let sv = singular_values(&delta);
        sv[0] / sv[d_u - 1]
    } else {
        f64::INFINITY
    };
    Ok(DesignDiagnostics {
        delta,
        column_rank,
        condition_number,
        satisfies_variability,
    })
}

/// Base environment with every variance at `low`; environment `e = 1..d_u`
/// raises component `e` to `high`. The resulting `Delta` is
/// `(1/high - 1/low) I`, condition number one.
pub fn design_max_variability(d_u: usize, high: f64, low: f64) -> Result<Vec<EnvironmentSpec>> {
    if d_u == 0 {
        return Err(Error::InvalidArgument("d_u must be positive".into()));
    }
    if !(low > 0.0 && low < high && high.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < low < high, got low = {low}, high = {high}"
        )));
    }
    (0..=d_u)
        .map(|e| {
            let mut v = DVector::from_element(d_u, low);
            if e > 0 {
                v[e - 1] = high;
            }
            EnvironmentSpec::new(e, v, None)
        })
        .collect()
}

/// Default variances of [`design_max_variability`].
pub const MAX_VARIABILITY_HIGH: f64 = 0.9999;
pub const MAX_VARIABILITY_LOW: f64 = 0.0001;

/// `num_envs` environments with every variance drawn i.i.d. uniform on
/// `[lo, hi]`.
pub fn sample_random_design(
    d_u: usize,
    num_envs: usize,
    (lo, hi): (f64, f64),
    seed: u64,
) -> Result<Vec<EnvironmentSpec>> {
    if d_u == 0 {
        return Err(Error::InvalidArgument("d_u must be positive".into()));
    }
    if num_envs <= d_u {
        return Err(Error::TooFewEnvironments {
            required: d_u + 1,
            actual: num_envs,
        });
    }
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "variance interval must satisfy 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_envs)
        .map(|e| {
            let v = DVector::from_fn(d_u, |_, _| rng.random_range(lo..=hi));
            EnvironmentSpec::new(e, v, None)
        })
        .collect()
}

/// Assigns each environment a mean drawn i.i.d. uniform on `[-scale, scale]`.
pub fn with_random_means(
    specs: Vec<EnvironmentSpec>,
    scale: f64,
    seed: u64,
) -> Result<Vec<EnvironmentSpec>> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("mean scale must be positive, got {scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    specs
        .into_iter()
        .map(|s| {
            let mean = DVector::from_fn(s.dim(), |_, _| rng.random_range(-scale..=scale));
            s.with_mean(mean)
        })
        .collect()
}
