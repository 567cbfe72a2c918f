use std::path::Path;

use anyhow::{ensure, Context, Result};
use lti_ident::lti::StateSpace;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub const SYSTEM_SCHEMA_VERSION: u32 = 1;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
}

impl MatrixDocument {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            entries: m.transpose().as_slice().to_vec(),
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        ensure!(
            self.entries.len() == self.rows * self.cols,
            "matrix document has {} entries for shape {}x{}",
            self.entries.len(),
            self.rows,
            self.cols
        );
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.entries))
    }
}

/// `(A, B, C)` of a discrete system with its fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDocument {
    pub schema_version: u32,
    pub fingerprint: String,
    pub a: MatrixDocument,
    pub b: MatrixDocument,
    pub c: MatrixDocument,
}

impl SystemDocument {
    pub fn from_system(sys: &StateSpace) -> Self {
        Self {
            schema_version: SYSTEM_SCHEMA_VERSION,
            fingerprint: sys.fingerprint(),
            a: MatrixDocument::from_matrix(sys.a()),
            b: MatrixDocument::from_matrix(sys.b()),
            c: MatrixDocument::from_matrix(sys.c()),
        }
    }

    pub fn to_system(&self) -> Result<StateSpace> {
        ensure!(
            self.schema_version == SYSTEM_SCHEMA_VERSION,
            "unsupported system schema version {}",
            self.schema_version
        );
        let sys = StateSpace::new(self.a.to_matrix()?, self.b.to_matrix()?, self.c.to_matrix()?)?;
        ensure!(sys.fingerprint() == self.fingerprint, "system fingerprint mismatch");
        Ok(sys)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}
