//! Ho-Kalman realization of `(A, B, C)` from Markov parameters.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::linalg::{pinv, svd, Svd};
use crate::lti::{HankelMatrix, MarkovParams, StateSpace};
use crate::{Error, Result};

/// Smallest kept singular value relative to the largest.
pub const RANK_DEFICIENCY_RTOL: f64 = 1e-10;
/// Ratio `sigma_{d_x+1} / sigma_{d_x}` above which the order is flagged.
pub const RANK_GAP_WARNING: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct HoKalmanResult {
    #[serde(skip)]
    pub sys: StateSpace,
    /// All singular values of the Hankel matrix, nonincreasing.
    pub singular_values: Vec<f64>,
    pub effective_rank: usize,
    pub t1: usize,
    pub t2: usize,
    /// Set when the next singular value is not clearly separated.
    pub rank_gap_warning: bool,
}

/// Block Hankel matrix whose block `(i, j)` is Markov block `i + j - 1 + shift`.
fn hankel_shifted(mp: &MarkovParams, t1: usize, t2: usize, shift: usize) -> Result<DMatrix<f64>> {
    if t1 == 0 || t2 == 0 {
        return Err(Error::InvalidArgument("Hankel sizes must be positive".into()));
    }
    let needed = t1 + t2 + shift;
    if needed > mp.horizon() {
        return Err(Error::HorizonTooShort {
            horizon: mp.horizon(),
            t1,
            t2,
        });
    }
    let (p, m) = (mp.output_dim(), mp.input_dim());
    let mut h = DMatrix::zeros(t1 * p, t2 * m);
    for i in 0..t1 {
        for j in 0..t2 {
            let block = mp.block(i + j + 1 + shift).expect("checked against horizon");
            h.view_mut((i * p, j * m), (p, m)).copy_from(block);
        }
    }
    Ok(h)
}

/// `t1 x t2` block Hankel matrix with block `(i, j)` equal to `C A^{i+j-2} B`.
/// Requires `t1 + t2 <= mp.horizon()`.
pub fn hankel(mp: &MarkovParams, t1: usize, t2: usize) -> Result<HankelMatrix> {
    Ok(HankelMatrix {
        t1,
        t2,
        data: hankel_shifted(mp, t1, t2, 0)?,
    })
}

/// Balanced Ho-Kalman realization of order `d_x`.
///
/// Needs one block past the Hankel matrix for the shifted Hankel, i.e.
/// `t1 + t2 + 1 <= mp.horizon()`.
pub fn ho_kalman(mp: &MarkovParams, d_x: usize, t1: usize, t2: usize) -> Result<HoKalmanResult> {
    let (p, m) = (mp.output_dim(), mp.input_dim());
    if d_x == 0 || d_x > (t1 * p).min(t2 * m) {
        return Err(Error::InvalidArgument(format!(
            "state dimension {d_x} must lie in 1..={}",
            (t1 * p).min(t2 * m)
        )));
    }
    let h = hankel_shifted(mp, t1, t2, 0)?;
    let h_shift = hankel_shifted(mp, t1, t2, 1)?;

    let Svd { u, s: sv, vt } = svd(&h)?;

    let ratio = if sv[0] > 0.0 { sv[d_x - 1] / sv[0] } else { 0.0 };
    if !(ratio >= RANK_DEFICIENCY_RTOL) {
        return Err(Error::RankDeficient {
            requested: d_x,
            ratio,
        });
    }
    let rank_gap_warning = sv.get(d_x).is_some_and(|&next| next / sv[d_x - 1] > RANK_GAP_WARNING);
    if rank_gap_warning {
        log::warn!(
            "Hankel singular values {:.3e} / {:.3e} leave order {d_x} poorly separated",
            sv[d_x],
            sv[d_x - 1]
        );
    }

    let mut obs = DMatrix::zeros(t1 * p, d_x);
    let mut ctrb = DMatrix::zeros(d_x, t2 * m);
    for (k, s) in sv.iter().take(d_x).enumerate() {
        let root = s.sqrt();
        obs.set_column(k, &(u.column(k) * root));
        ctrb.set_row(k, &(vt.row(k) * root));
    }
    let a = pinv(&obs) * h_shift * pinv(&ctrb);
    let b = ctrb.columns(0, m).into_owned();
    let c = obs.rows(0, p).into_owned();
    Ok(HoKalmanResult {
        sys: StateSpace::new(a, b, c)?,
        singular_values: sv,
        effective_rank: d_x,
        t1,
        t2,
        rank_gap_warning,
    })
}
