//! Identification of Gaussian linear time-invariant systems from
//! multi-environment interventional data.
//!
//! The crate covers the whole pipeline:
//!
//! * [`lti`]: discrete and continuous state-space models, structural checks,
//!   simulation, Markov parameters, transfer functions and exact densities.
//! * [`environments`]: intervention designs (per-environment diagonal control
//!   covariances), the environment variability matrix and dataset generation.
//! * [`estimator`]: a linear decoder `(y_{t+1}; y_t) -> u_t` fitted by
//!   minibatch gradient descent on the multi-environment Gaussian likelihood.
//! * [`sysid`]: Ho-Kalman recovery of `(A, B, C)` from Markov parameters.
//! * [`metrics`]: mean correlation coefficient and transfer-function
//!   equivalence up to permutation and diagonal scaling.
//! * [`physical`]: the DC motor example system.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod environments;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod lti;
pub mod metrics;
pub mod physical;
pub mod sysid;

pub use error::{Error, Result};
