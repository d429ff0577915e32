use crate::autodiff::{Tape, Tensor, Var};
use crate::flow::{integrate, points_tensor, tensor_points, BoundMlp, Direction, FlowConfig, FlowError, ImNetMlp, LatentVelocity};
use crate::mesh::{PointSet, PointSource};

use super::rbf::rbf_latents;
use super::ControlPointSet;

/// Flows the rows of `x` under one latent `z` (1×d) shared by every point.
pub fn global_flow(tape: &mut Tape, mlp: &BoundMlp, x: Var, z: Var, cfg: &FlowConfig) -> Result<Var, FlowError> {
    let rows = tape.value(x).rows();
    let zb = tape.broadcast_rows(z, rows)?;
    let field = LatentVelocity::new(tape, mlp, zb)?;
    integrate(tape, &field, x, cfg, Direction::Forward)
}

/// Flows the rows of `x` with latents interpolated from the control points
/// at each row's starting position.
pub fn local_flow(
    tape: &mut Tape,
    mlp: &BoundMlp,
    x: Var,
    centers: Var,
    inv_widths: Var,
    z_local: Var,
    cfg: &FlowConfig,
) -> Result<Var, FlowError> {
    let z = rbf_latents(tape, x, centers, inv_widths, z_local)?;
    let field = LatentVelocity::new(tape, mlp, z)?;
    integrate(tape, &field, x, cfg, Direction::Forward)
}

pub struct GlobalStage<'a> {
    pub mlp: &'a ImNetMlp,
    pub z: &'a [f64],
}

pub struct LocalStage<'a> {
    pub mlp: &'a ImNetMlp,
    pub cps: &'a ControlPointSet,
    /// M × d.
    pub z_local: &'a Tensor,
}

/// Global deformer first, then (optionally) the local deformer on its output.
pub fn compose_deformers(
    points: &PointSet,
    global: GlobalStage<'_>,
    local: Option<LocalStage<'_>>,
    cfg: &FlowConfig,
) -> Result<PointSet, FlowError> {
    let mut tape = Tape::new();
    let x = tape.constant(points_tensor(points.points()));
    let gm = global.mlp.bind(&mut tape, false);
    let z = tape.constant(Tensor::matrix(1, global.z.len(), global.z.to_vec())?);
    let mut y = global_flow(&mut tape, &gm, x, z, cfg)?;
    if let Some(l) = local {
        let lm = l.mlp.bind(&mut tape, false);
        let c = tape.constant(l.cps.positions_tensor());
        let e = tape.constant(l.cps.widths_tensor());
        let zl = tape.constant(l.z_local.clone());
        y = local_flow(&mut tape, &lm, y, c, e, zl, cfg)?;
    }
    Ok(PointSet::new(tensor_points(tape.value(y)), PointSource::External)?)
}
