//! Discrete and continuous LTI state-space models.
//!
//! A discrete system evolves as `x_{t+1} = A x_t + B u_t`, `y_t = C x_t + eps_t`.

mod analysis;
mod density;
mod discretize;
mod markov;
mod simulate;
mod transfer;

pub use analysis::{validate_system, SystemReport};
pub use density::{output_log_density, log_odds, trajectory_log_density};
pub use discretize::{discretize, Discretization};
pub use markov::{markov_params, unrolled_map, HankelMatrix, MarkovParams};
pub use simulate::{simulate, Trajectory};
pub use transfer::{
    similarity_transform, similarity_transform_with_cap, transfer_function,
    DEFAULT_TRANSFORM_CONDITION_CAP,
};

use nalgebra::DMatrix;

use crate::linalg::Fingerprint;
use crate::{Error, Result};

fn check_triple(
    context: &'static str,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<()> {
    let n = a.nrows();
    if !a.is_square() || n == 0 {
        return Err(Error::dim(
            context,
            "nonempty square A",
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    if b.nrows() != n || b.ncols() == 0 {
        return Err(Error::dim(
            context,
            format!("B with {n} rows"),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    if c.ncols() != n || c.nrows() == 0 {
        return Err(Error::dim(
            context,
            format!("C with {n} columns"),
            format!("{}x{}", c.nrows(), c.ncols()),
        ));
    }
    if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(context));
    }
    Ok(())
}

/// Discrete-time system matrices `(A, B, C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        check_triple("StateSpace", &a, &b, &c)?;
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// SHA-256 over the exact bit patterns of `A`, `B` and `C`.
    pub fn fingerprint(&self) -> String {
        Fingerprint::new()
            .tag("StateSpace")
            .matrix(&self.a)
            .matrix(&self.b)
            .matrix(&self.c)
            .hex()
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        (self.a, self.b, self.c)
    }
}

/// Continuous-time system `dx/dt = A_c x + B_c u`, `y = C_c x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousStateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl ContinuousStateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        check_triple("ContinuousStateSpace", &a, &b, &c)?;
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inconsistent_dimensions() {
        let a = DMatrix::identity(2, 2);
        assert!(StateSpace::new(a.clone(), DMatrix::zeros(3, 1), DMatrix::identity(2, 2)).is_err());
        assert!(StateSpace::new(a.clone(), DMatrix::zeros(2, 1), DMatrix::zeros(1, 3)).is_err());
        assert!(StateSpace::new(DMatrix::zeros(2, 3), DMatrix::zeros(2, 1), DMatrix::zeros(1, 2)).is_err());
        assert!(StateSpace::new(a, DMatrix::zeros(2, 1), DMatrix::zeros(1, 2)).is_ok());
    }

    #[test]
    fn rejects_non_finite_entries() {
        let mut a = DMatrix::identity(2, 2);
        a[(0, 1)] = f64::NAN;
        let err = StateSpace::new(a, DMatrix::zeros(2, 1), DMatrix::zeros(1, 2)).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn fingerprint_tracks_bits() {
        let s1 = StateSpace::new(DMatrix::identity(2, 2), DMatrix::identity(2, 2), DMatrix::identity(2, 2)).unwrap();
        let mut b = DMatrix::identity(2, 2);
        b[(1, 0)] = 1e-300;
        let s2 = StateSpace::new(DMatrix::identity(2, 2), b, DMatrix::identity(2, 2)).unwrap();
        assert_eq!(s1.fingerprint(), s1.clone().fingerprint());
        assert_ne!(s1.fingerprint(), s2.fingerprint());
    }
}
