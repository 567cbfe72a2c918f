//! Small dense linear-algebra helpers shared by the modules.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Relative factor of the singular-value rank threshold
/// `tau = max(rows, cols) * sigma_max * RANK_RTOL`.
pub const RANK_RTOL: f64 = 1e-12;

/// Thin SVD `m = u * diag(s) * vt`, singular values nonincreasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub vt: DMatrix<f64>,
}

impl Svd {
    pub fn recompose(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&DVector::from_column_slice(&self.s)) * &self.vt
    }
}

fn to_faer<T: Copy>(m: &DMatrix<T>) -> faer::Mat<T> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn svd(m: &DMatrix<f64>) -> Result<Svd> {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return Ok(Svd {
            u: DMatrix::zeros(m.nrows(), 0),
            s: Vec::new(),
            vt: DMatrix::zeros(0, m.ncols()),
        });
    }
    let f = to_faer(m).thin_svd().map_err(|_| Error::NoConvergence)?;
    let (u, s, v) = (f.U(), f.S().column_vector(), f.V());
    Ok(Svd {
        u: DMatrix::from_fn(m.nrows(), k, |i, j| u[(i, j)]),
        s: (0..k).map(|i| s[i]).collect(),
        vt: DMatrix::from_fn(k, m.ncols(), |i, j| v[(j, i)]),
    })
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    svd_values(m)
}

/// Singular values of a complex matrix in nonincreasing order.
pub fn complex_singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    svd_values(m)
}

fn svd_values<T: faer::traits::ComplexField<Real = f64> + Copy>(m: &DMatrix<T>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv = to_faer(m)
        .singular_values()
        .expect("singular value iteration converges");
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Numerical rank with the threshold `max(rows, cols) * sigma_max * 1e-12`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = singular_values(m);
    let Some(&max) = sv.first() else { return 0 };
    if max == 0.0 {
        return 0;
    }
    let tau = m.nrows().max(m.ncols()) as f64 * max * RANK_RTOL;
    sv.iter().filter(|&&s| s > tau).count()
}

/// Ratio of extreme singular values over the `min(rows, cols)` nonzero-capable
/// ones. Infinite when the smallest is zero.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&max), Some(&min)) if min > 0.0 => max / min,
        _ => f64::INFINITY,
    }
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return Err(Error::dim(
            "eigenvalues",
            "square matrix",
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000).ok_or(Error::NoConvergence)?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect())
}

/// Largest eigenvalue magnitude.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Moore-Penrose pseudo-inverse with the default rank threshold.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let Ok(f) = svd(m) else {
        return m.clone().pseudo_inverse(0.0).expect("nonnegative threshold");
    };
    let sv_max = f.s.first().copied().unwrap_or(0.0);
    let eps = m.nrows().max(m.ncols()) as f64 * sv_max * RANK_RTOL;
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in f.s.iter().enumerate() {
        if s > eps {
            out += f.vt.row(k).transpose() * f.u.column(k).transpose() / s;
        }
    }
    out
}

/// `log N(x; mean, cov)` via Cholesky. Fails if `cov` is not positive definite.
pub fn gaussian_log_density(
    x: &DVector<f64>,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
) -> Result<f64> {
    let n = x.len();
    let chol = cov
        .clone()
        .cholesky()
        .ok_or(Error::SingularCovariance("gaussian_log_density"))?;
    let diff = x - mean;
    let w = chol.l().solve_lower_triangular(&diff).expect("nonsingular factor");
    let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    Ok(-0.5 * (w.norm_squared() + log_det + n as f64 * (2.0 * std::f64::consts::PI).ln()))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    // Row-major fill so the draw order does not depend on storage layout.
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Matrix with orthonormal rows (if `rows <= cols`) or columns, taken from
/// the Q factor of a Gaussian matrix with the signs fixed so that `diag(R) > 0`.
pub fn orthogonal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let tall = rows >= cols;
    let g = gaussian_matrix(rows.max(cols), rows.min(cols), rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if tall {
        q
    } else {
        q.transpose()
    }
}

/// Derives an independent stream seed from a master seed and an index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(index.to_le_bytes());
    let out = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&out[..8]);
    u64::from_le_bytes(bytes)
}

/// Incremental SHA-256 fingerprint over matrices and scalars.
#[derive(Default)]
pub struct Fingerprint(Sha256);

impl Fingerprint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tag(mut self, tag: &str) -> Self {
        self.0.update((tag.len() as u64).to_le_bytes());
        self.0.update(tag.as_bytes());
        self
    }

    pub fn matrix(mut self, m: &DMatrix<f64>) -> Self {
        self.0.update((m.nrows() as u64).to_le_bytes());
        self.0.update((m.ncols() as u64).to_le_bytes());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                self.0.update(m[(i, j)].to_bits().to_le_bytes());
            }
        }
        self
    }

    pub fn scalars(mut self, xs: &[f64]) -> Self {
        self.0.update((xs.len() as u64).to_le_bytes());
        for x in xs {
            self.0.update(x.to_bits().to_le_bytes());
        }
        self
    }

    pub fn integer(mut self, v: u64) -> Self {
        self.0.update(v.to_le_bytes());
        self
    }

    pub fn hex(self) -> String {
        self.0
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
