//! Auto-decoder training, latent PCA statistics, span-restricted fitting and
//! shape sampling.

mod fit;
mod loss;
mod model;
mod pca;
mod sample;
mod train;

use thiserror::Error;

use crate::autodiff::{CheckpointError, TensorError};
use crate::flow::FlowError;
use crate::latent::LatentError;
use crate::mesh::MeshError;

pub use fit::{fit_latent, FitConfig, FitResult};
pub use loss::{chamfer_loss, LossMode};
pub use model::{FlowSsmModel, NormalizationInfo, MODEL_FORMAT};
pub use pca::{fit_pca, PcaBasis, PcaFit};
pub use sample::{sample_shape, sample_weights};
pub use train::{init_model, mean_reconstruction_loss, train, TrainHistory, TrainOutput, TrainingConfig};

#[derive(Debug, Error)]
pub enum SsmError {
    #[error("invalid data: {0}")]
    Data(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model has no PCA bases; train it first")]
    NotTrained,
    #[error("non-finite loss ({0})")]
    NonFiniteLoss(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Latent(#[from] LatentError),
}
