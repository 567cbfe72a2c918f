//! Identifiability scores: mean correlation coefficient after optimal
//! matching, and transfer-function equivalence up to column permutation and
//! scaling.

mod assignment;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

pub use assignment::linear_sum_assignment;

use crate::lti::{transfer_function, StateSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MccReport {
    pub mcc: f64,
    /// `permutation[i]` is the estimated component matched to true component `i`.
    pub permutation: Vec<usize>,
    /// `|corr|` of each matched pair, indexed by true component.
    pub per_component_corr: Vec<f64>,
    pub n_samples: usize,
}

/// Centered columns of a sample sequence and their norms.
fn centered(xs: &[DVector<f64>], which: &'static str) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let d = xs[0].len();
    let n = xs.len() as f64;
    let mut cols = Vec::with_capacity(d);
    let mut norms = Vec::with_capacity(d);
    for k in 0..d {
        let col: Vec<f64> = xs.iter().map(|x| x[k]).collect();
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(which));
        }
        let mean = col.iter().sum::<f64>() / n;
        let scale = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let c: Vec<f64> = col.iter().map(|v| v - mean).collect();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-13 * scale * n.sqrt() || norm == 0.0 {
            return Err(Error::UndefinedCorrelation { which, component: k });
        }
        cols.push(c);
        norms.push(norm);
    }
    Ok((cols, norms))
}

/// Absolute Pearson correlations, entry `(i, j)` between `a[i]` and `b[j]`.
pub fn abs_correlation_matrix(a: &[DVector<f64>], b: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    if a.len() != b.len() {
        return Err(Error::dim("correlation: sample count", a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument("correlation needs at least two samples".into()));
    }
    let (ca, na) = centered(a, "u_true")?;
    let (cb, nb) = centered(b, "u_hat")?;
    Ok(DMatrix::from_fn(ca.len(), cb.len(), |i, j| {
        let dot: f64 = ca[i].iter().zip(&cb[j]).map(|(x, y)| x * y).sum();
        (dot / (na[i] * nb[j])).abs().min(1.0)
    }))
}

/// Mean absolute correlation between matched components of `u_true` and
/// `u_hat`, with the matching chosen to maximize it.
pub fn mcc(u_true: &[DVector<f64>], u_hat: &[DVector<f64>]) -> Result<MccReport> {
    if let (Some(a), Some(b)) = (u_true.first(), u_hat.first()) {
        if a.len() != b.len() {
            return Err(Error::dim("mcc: component count", a.len(), b.len()));
        }
        if let Some(bad) = u_true.iter().chain(u_hat).find(|v| v.len() != a.len()) {
            return Err(Error::dim("mcc: sample", a.len(), bad.len()));
        }
    }
    let corr = abs_correlation_matrix(u_true, u_hat)?;
    let (permutation, _) = linear_sum_assignment(&(-&corr))?;
    let per_component_corr: Vec<f64> = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| corr[(i, j)])
        .collect();
    Ok(MccReport {
        mcc: per_component_corr.iter().sum::<f64>() / per_component_corr.len() as f64,
        permutation,
        per_component_corr,
        n_samples: u_true.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferEquivalence {
    pub equivalent: bool,
    /// Column `j` of the first transfer function matches column
    /// `permutation[j]` of the second.
    pub permutation: Vec<usize>,
    /// Real factor applied to each matched column of the second system.
    pub scales: Vec<f64>,
    /// `max_z |H1 - H2 P D|_F / |H1|_F`.
    pub max_rel_error: f64,
}

/// Tests whether `H1(z) = H2(z) P D` on the samples for some column
/// permutation `P` and real diagonal `D`.
pub fn transfer_equivalence(
    sys1: &StateSpace,
    sys2: &StateSpace,
    z_samples: &[Complex64],
    tol: f64,
) -> Result<TransferEquivalence> {
    if (sys1.output_dim(), sys1.input_dim()) != (sys2.output_dim(), sys2.input_dim()) {
        return Err(Error::dim(
            "transfer_equivalence",
            format!("{}x{}", sys1.output_dim(), sys1.input_dim()),
            format!("{}x{}", sys2.output_dim(), sys2.input_dim()),
        ));
    }
    if z_samples.is_empty() {
        return Err(Error::InvalidArgument("no sample points".into()));
    }
    let h1: Vec<_> = z_samples.iter().map(|&z| transfer_function(sys1, z)).collect::<Result<_>>()?;
    let h2: Vec<_> = z_samples.iter().map(|&z| transfer_function(sys2, z)).collect::<Result<_>>()?;
    let m = sys1.input_dim();

    // Least-squares real scale and residual of every column pairing.
    let mut scale = DMatrix::zeros(m, m);
    let mut residual = DMatrix::zeros(m, m);
    for j in 0..m {
        for k in 0..m {
            let (mut cross, mut energy) = (0.0, 0.0);
            for (a, b) in h1.iter().zip(&h2) {
                for (x, y) in a.column(j).iter().zip(b.column(k).iter()) {
                    cross += (y.conj() * x).re;
                    energy += y.norm_sqr();
                }
            }
            let d = if energy > 0.0 { cross / energy } else { 0.0 };
            let r: f64 = h1
                .iter()
                .zip(&h2)
                .map(|(a, b)| (a.column(j) - b.column(k) * Complex64::new(d, 0.0)).norm_squared())
                .sum();
            scale[(j, k)] = d;
            residual[(j, k)] = r;
        }
    }
    let (permutation, _) = linear_sum_assignment(&residual)?;
    let scales: Vec<f64> = permutation.iter().enumerate().map(|(j, &k)| scale[(j, k)]).collect();

    let mut max_rel_error = 0.0f64;
    for (a, b) in h1.iter().zip(&h2) {
        let mut diff = a.clone();
        for (j, &k) in permutation.iter().enumerate() {
            let col = a.column(j) - b.column(k) * Complex64::new(scales[j], 0.0);
            diff.set_column(j, &col);
        }
        let denom = a.norm();
        let rel = if denom > 0.0 { diff.norm() / denom } else { diff.norm() };
        max_rel_error = max_rel_error.max(rel);
    }
    Ok(TransferEquivalence {
        equivalent: max_rel_error <= tol,
        permutation,
        scales,
        max_rel_error,
    })
}

/// `count` points evenly spaced on the circle `|z| = radius`, offset by half
/// a step so the real axis is avoided.
pub fn circle_samples(radius: f64, count: usize) -> Vec<Complex64> {
    (0..count)
        .map(|k| {
            let theta = std::f64::consts::TAU * (k as f64 + 0.5) / count as f64;
            Complex64::from_polar(radius, theta)
        })
        .collect()
}
