//! Global latents, the control-point RBF latent field and the two-stage
//! global→local deformer.

mod compose;
mod rbf;

use thiserror::Error;

pub use compose::{compose_deformers, global_flow, local_flow, GlobalStage, LocalStage};
pub use rbf::{interpolate_latent, place_control_points, rbf_latents, ControlPointSet, EPS_RANGE};

#[derive(Debug, Error)]
pub enum LatentError {
    #[error("invalid latent configuration: {0}")]
    Invalid(String),
}

use crate::autodiff::Tensor;

/// Per-shape latent code: one global vector and one vector per control point.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentState {
    pub z_global: Vec<f64>,
    /// M × d, row k belongs to control point k.
    pub z_local: Tensor,
}

impl LatentState {
    pub fn zeros(d: usize, m: usize) -> Self {
        Self {
            z_global: vec![0.0; d],
            z_local: Tensor::zeros(&[m, d]),
        }
    }

    pub fn d(&self) -> usize {
        self.z_global.len()
    }

    pub fn m(&self) -> usize {
        self.z_local.rows()
    }

    pub fn is_finite(&self) -> bool {
        self.z_global.iter().all(|v| v.is_finite()) && self.z_local.is_finite()
    }
}
