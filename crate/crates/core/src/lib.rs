//! Generalized Gaussian scale mixture (GGSM) analysis of the Visual
//! Information Fidelity (VIF) index.
//!
//! - [`mggd`]: multivariate generalized Gaussian density, sampler, entropy,
//!   Fisher information and kurtosis in closed form.
//! - [`kurtosis`]: Mardia kurtosis of sums of independent vectors and the
//!   moment-matching fit.
//! - [`infotheory`]: entropy-power and Fisher-information bounds on the
//!   mutual informations of the VIF channels, the moment-matched
//!   approximation, and VIF aggregation.
//! - [`pipeline`]: Laplacian pyramid, block vectors and parameter estimation
//!   from an image pair.
//! - [`oracle`]: Monte Carlo reference estimators.
//! - [`verify`]: the oracle sweeps that check every closed form.

pub mod error;
pub mod infotheory;
pub mod kurtosis;
pub mod linalg;
pub mod mggd;
pub mod oracle;
pub mod pipeline;
pub mod stream;
pub mod verify;

pub use error::{Error, Result};
pub use infotheory::{ChannelParams, MiBound, QualityReport};
pub use kurtosis::{EllipticalSummary, MomentSummary};
pub use mggd::{FisherInfo, MggdParams};
pub use oracle::OracleEstimate;
