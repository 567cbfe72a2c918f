use nalgebra::DMatrix;

use super::StateSpace;
use crate::{Error, Result};

/// Markov parameter sequence `[I, CB, CAB, ..., CA^{T-2}B]` of horizon `T`.
///
/// Block 0 is the identity convention block and only exists for square
/// input/output maps (`d_y == d_u`); otherwise it is omitted and
/// [`MarkovParams::has_identity_block`] is false. Blocks `k >= 1` are
/// `C A^{k-1} B`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovParams {
    identity: Option<DMatrix<f64>>,
    impulse: Vec<DMatrix<f64>>,
    output_dim: usize,
    input_dim: usize,
}

impl MarkovParams {
    /// Builds from the blocks `k >= 1` (`C B`, `C A B`, ...).
    pub fn from_impulse(impulse: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = impulse
            .first()
            .ok_or_else(|| Error::InvalidArgument("at least one Markov block required".into()))?;
        let (p, m) = first.shape();
        if let Some(bad) = impulse.iter().find(|b| b.shape() != (p, m)) {
            return Err(Error::dim(
                "MarkovParams",
                format!("{p}x{m} blocks"),
                format!("{}x{}", bad.nrows(), bad.ncols()),
            ));
        }
        Ok(Self::with_dims(impulse, p, m))
    }

    fn with_dims(impulse: Vec<DMatrix<f64>>, p: usize, m: usize) -> Self {
        Self {
            identity: (p == m).then(|| DMatrix::identity(p, m)),
            impulse,
            output_dim: p,
            input_dim: m,
        }
    }

    /// Number of blocks including the (possibly omitted) identity block.
    pub fn horizon(&self) -> usize {
        self.impulse.len() + 1
    }

    pub fn has_identity_block(&self) -> bool {
        self.identity.is_some()
    }

    /// Block `k`; `None` for `k = 0` without identity block or `k >= horizon`.
    pub fn block(&self, k: usize) -> Option<&DMatrix<f64>> {
        match k {
            0 => self.identity.as_ref(),
            _ => self.impulse.get(k - 1),
        }
    }

    /// Blocks `k >= 1`.
    pub fn impulse(&self) -> &[DMatrix<f64>] {
        &self.impulse
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }
}

/// Block Hankel matrix with block `(i, j)` (1-indexed) equal to Markov block
/// `i + j - 1`, i.e. `C A^{i+j-2} B`.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelMatrix {
    pub t1: usize,
    pub t2: usize,
    pub data: DMatrix<f64>,
}

pub fn markov_params(sys: &StateSpace, horizon: usize) -> Result<MarkovParams> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("Markov horizon must be positive".into()));
    }
    let mut impulse = Vec::with_capacity(horizon - 1);
    let mut ak_b = sys.b().clone();
    for _ in 1..horizon {
        impulse.push(sys.c() * &ak_b);
        ak_b = sys.a() * ak_b;
    }
    Ok(MarkovParams::with_dims(impulse, sys.output_dim(), sys.input_dim()))
}

/// Cumulative input-to-output map `T_t = sum_{i=1..t} C A^{i-1} B`.
pub fn unrolled_map(sys: &StateSpace, t: usize) -> Result<DMatrix<f64>> {
    if t == 0 {
        return Err(Error::InvalidArgument("unrolled map needs t >= 1".into()));
    }
    let mut acc = DMatrix::zeros(sys.output_dim(), sys.input_dim());
    let mut ak_b = sys.b().clone();
    for _ in 0..t {
        acc += sys.c() * &ak_b;
        ak_b = sys.a() * ak_b;
    }
    Ok(acc)
}
