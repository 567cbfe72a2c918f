use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::loss::FitConfig;
use crate::linalg::{numerical_rank, pinv};
use crate::lti::StateSpace;
use crate::{Error, Result};

/// Linear map `M = [M1 | M2]` from `(y_{t+1}; y_t)` to the control `u_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDecoder {
    m: DMatrix<f64>,
}

impl LinearDecoder {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 || !m.ncols().is_multiple_of(2) {
            return Err(Error::dim("LinearDecoder: columns", "positive even", m.ncols()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("LinearDecoder"));
        }
        Ok(Self { m })
    }

    /// The exact inverse map of a noise-free system:
    /// `u_t = (CB)^+ (y_{t+1} - C A C^+ y_t)`.
    ///
    /// Needs `C` with full column rank (the state is read off `y_t`) and
    /// `CB` with full column rank.
    pub fn from_system(sys: &StateSpace) -> Result<Self> {
        let (a, b, c) = (sys.a(), sys.b(), sys.c());
        let cb = c * b;
        if numerical_rank(c) < sys.state_dim() || numerical_rank(&cb) < sys.input_dim() {
            return Err(Error::InvalidArgument(
                "analytic decoder needs C and CB of full column rank".into(),
            ));
        }
        let m1 = pinv(&cb);
        let m2 = -&m1 * c * a * pinv(c);
        let p = sys.output_dim();
        let mut m = DMatrix::zeros(sys.input_dim(), 2 * p);
        m.view_mut((0, 0), (sys.input_dim(), p)).copy_from(&m1);
        m.view_mut((0, p), (sys.input_dim(), p)).copy_from(&m2);
        Self::new(m)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn input_dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.m.ncols() / 2
    }

    /// `M1`, acting on `y_{t+1}`.
    pub fn output_block(&self) -> DMatrix<f64> {
        self.m.columns(0, self.output_dim()).into_owned()
    }

    /// `M2`, acting on `y_t`.
    pub fn lagged_block(&self) -> DMatrix<f64> {
        let p = self.output_dim();
        self.m.columns(p, p).into_owned()
    }

    pub fn predict_controls(&self, y: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        predict_controls(self, y)
    }

    pub fn to_document(&self, config: Option<&FitConfig>, dataset_fingerprint: Option<&str>) -> DecoderDocument {
        DecoderDocument {
            rows: self.m.nrows(),
            cols: self.m.ncols(),
            entries: self.m.transpose().as_slice().to_vec(),
            config: config.cloned(),
            dataset_fingerprint: dataset_fingerprint.map(str::to_owned),
        }
    }

    pub fn from_document(doc: &DecoderDocument) -> Result<Self> {
        if doc.entries.len() != doc.rows * doc.cols {
            return Err(Error::dim("decoder document entries", doc.rows * doc.cols, doc.entries.len()));
        }
        Self::new(DMatrix::from_row_slice(doc.rows, doc.cols, &doc.entries))
    }
}

/// `u_hat_t = M (y_{t+1}; y_t)` for `t = 0 .. len - 2`.
pub fn predict_controls(decoder: &LinearDecoder, y: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let p = decoder.output_dim();
    if let Some(bad) = y.iter().find(|v| v.len() != p) {
        return Err(Error::dim("predict_controls: output", p, bad.len()));
    }
    let m1 = decoder.m.columns(0, p);
    let m2 = decoder.m.columns(p, p);
    Ok(y.windows(2).map(|w| m1 * &w[1] + m2 * &w[0]).collect())
}

/// On-disk form of a decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderDocument {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries of `M`.
    pub entries: Vec<f64>,
    pub config: Option<FitConfig>,
    pub dataset_fingerprint: Option<String>,
}

impl DecoderDocument {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
