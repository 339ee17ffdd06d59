//! Counterfactual survival analysis with kernel mean embeddings.
//!
//! The pipeline is: load right-censored data ([`dataset`]), weight uncensored
//! observations by the inverse reverse Kaplan–Meier curve ([`survival`]),
//! solve a weighted kernel ridge problem for the conditional mean embedding
//! of one arm and average it over the other arm's covariates ([`embedding`]).
//! [`simulate`] holds the log-normal simulation study and the rate experiment.

pub mod dataset;
pub mod embedding;
pub mod error;
pub mod kernels;
pub mod simulate;
pub mod survival;

pub use dataset::{Arm, Observation, RightCensoredSample};
pub use embedding::{EmbeddingCurve, EmbeddingKernels, RidgeSolveConfig};
pub use error::{Error, ErrorKind, Result};
pub use kernels::GaussianKernel;
pub use survival::{StepFunction, WeightedArm};
