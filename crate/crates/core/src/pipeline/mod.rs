//! Image ingestion, Laplacian-pyramid decomposition, block vectorization and
//! estimation of the source and channel models from an image pair.

mod blocks;
mod estimate;
mod plane;
mod pyramid;
mod score;

pub use blocks::{vectorize, SubbandField, SubbandId};
pub use estimate::{
    estimate_alpha, fit_channel, fit_gsm, AlphaEstimate, ChannelFit, SubbandModel, Windows,
};
pub use plane::{load_luma, luma_plane, Plane};
pub use pyramid::{blur, check_size, decompose, expand, reduce, LaplacianPyramid, KERNEL};
pub use score::{fit_pair, score_pair, AlphaMode, FittedSubband, NeuralNoise, ScoreConfig};
