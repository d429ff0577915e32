//! Latent-conditioned velocity fields and their fixed-step flows.

mod check;
mod integrate;
mod mlp;

use thiserror::Error;

use crate::autodiff::TensorError;
use crate::mesh::MeshError;

pub use check::{flow_jacobian_check, relative_error, GradientCheck};
pub use integrate::{
    integrate, integrate_flow, velocity, Direction, FlowConfig, Integrator, LatentVelocity, VelocityField,
    DIVERGENCE_BOUND,
};
pub(crate) use integrate::{points_tensor, tensor_points};
pub use mlp::{BoundMlp, ImNetMlp, MlpConfig};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("trajectory diverged (|x| = {0:e})")]
    Diverged(f64),
    #[error("invalid flow configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}
