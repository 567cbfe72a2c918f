//! Maximum-likelihood estimation of a linear decoder from multi-environment
//! outputs.

mod data;
mod decoder;
mod fit;
mod loss;

pub use data::{center, validation_cut, EnvData, FitData, MeanRecord};
pub use decoder::{predict_controls, DecoderDocument, LinearDecoder};
pub use fit::{fit, fit_from, FitReport};
pub use loss::{negative_log_likelihood, nll_and_gradient, FitConfig, Init, Preconditioning, Weighting, MIN_VOLUME};
