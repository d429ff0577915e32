use serde::{Deserialize, Serialize};

use super::{BoundMlp, FlowError, ImNetMlp};
use crate::autodiff::{Tape, Tensor, Var};
use crate::mesh::{PointSet, PointSource, Vec3};

/// Coordinates beyond this magnitude (normalized units) abort integration.
pub const DIVERGENCE_BOUND: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Euler,
    Rk4,
}

/// Fixed-step integration of the flow over t ∈ [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub n_steps: usize,
    pub integrator: Integrator,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            n_steps: 8,
            integrator: Integrator::Rk4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// t from 0 to 1.
    Forward,
    /// t from 1 to 0 along the negated velocity.
    Reverse,
}

/// A time-dependent velocity field evaluated on a tape.
pub trait VelocityField {
    /// Velocity at points `x` (rows × 3) and time `t`.
    fn eval(&self, tape: &mut Tape, x: Var, t: f64) -> Result<Var, FlowError>;
}

/// `f(x, t·z) · ‖z‖` with per-row latents `z`, held fixed along each trajectory.
pub struct LatentVelocity<'a> {
    mlp: &'a BoundMlp,
    z: Var,
    z_norm: Var,
}

impl<'a> LatentVelocity<'a> {
    /// `z` is rows × d, one latent per trajectory.
    pub fn new(tape: &mut Tape, mlp: &'a BoundMlp, z: Var) -> Result<Self, FlowError> {
        let z_norm = tape.row_norms(z)?;
        Ok(Self { mlp, z, z_norm })
    }
}

impl VelocityField for LatentVelocity<'_> {
    fn eval(&self, tape: &mut Tape, x: Var, t: f64) -> Result<Var, FlowError> {
        let tz = tape.scale(self.z, t)?;
        let input = tape.concat_cols(&[x, tz])?;
        let f = self.mlp.forward(tape, input)?;
        Ok(tape.mul_col(f, self.z_norm)?)
    }
}

fn check_bounded(tape: &Tape, x: Var) -> Result<(), FlowError> {
    let max = tape.value(x).data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max > DIVERGENCE_BOUND {
        return Err(FlowError::Diverged(max));
    }
    Ok(())
}

/// Unrolls the integrator on the tape so gradients flow through every step.
pub fn integrate(
    tape: &mut Tape,
    field: &dyn VelocityField,
    x0: Var,
    cfg: &FlowConfig,
    direction: Direction,
) -> Result<Var, FlowError> {
    if cfg.n_steps == 0 {
        return Err(FlowError::Config("n_steps must be at least 1".into()));
    }
    let (mut t, h) = match direction {
        Direction::Forward => (0.0, 1.0 / cfg.n_steps as f64),
        Direction::Reverse => (1.0, -1.0 / cfg.n_steps as f64),
    };
    let mut x = x0;
    for _ in 0..cfg.n_steps {
        x = match cfg.integrator {
            Integrator::Euler => {
                let k1 = field.eval(tape, x, t)?;
                let dx = tape.scale(k1, h)?;
                tape.add(x, dx)?
            }
            Integrator::Rk4 => {
                let k1 = field.eval(tape, x, t)?;
                let s1 = tape.scale(k1, h / 2.0)?;
                let x1 = tape.add(x, s1)?;
                let k2 = field.eval(tape, x1, t + h / 2.0)?;
                let s2 = tape.scale(k2, h / 2.0)?;
                let x2 = tape.add(x, s2)?;
                let k3 = field.eval(tape, x2, t + h / 2.0)?;
                let s3 = tape.scale(k3, h)?;
                let x3 = tape.add(x, s3)?;
                let k4 = field.eval(tape, x3, t + h)?;
                let k23 = tape.add(k2, k3)?;
                let k23 = tape.scale(k23, 2.0)?;
                let k14 = tape.add(k1, k4)?;
                let sum = tape.add(k14, k23)?;
                let dx = tape.scale(sum, h / 6.0)?;
                tape.add(x, dx)?
            }
        };
        check_bounded(tape, x)?;
        t += h;
    }
    Ok(x)
}

pub(crate) fn points_tensor(points: &[Vec3]) -> Tensor {
    Tensor::from_rows(points)
}

pub(crate) fn tensor_points(t: &Tensor) -> Vec<Vec3> {
    t.data().chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

/// Flows `x0` through `f(x, t·z(x0))·‖z(x0)‖`, with `latent_fn` evaluated
/// once per starting point.
pub fn integrate_flow(
    mlp: &ImNetMlp,
    x0: &PointSet,
    latent_fn: impl Fn(Vec3) -> Vec<f64>,
    cfg: &FlowConfig,
    direction: Direction,
) -> Result<PointSet, FlowError> {
    let d = mlp.input_dim() - 3;
    let mut zs = Vec::with_capacity(x0.len() * d);
    for &p in x0.points() {
        let z = latent_fn(p);
        if z.len() != d {
            return Err(FlowError::Config(format!("latent has length {}, expected {d}", z.len())));
        }
        zs.extend(z);
    }
    let mut tape = Tape::new();
    let bound = mlp.bind(&mut tape, false);
    let x = tape.constant(points_tensor(x0.points()));
    let z = tape.constant(Tensor::matrix(x0.len(), d, zs)?);
    let field = LatentVelocity::new(&mut tape, &bound, z)?;
    let out = integrate(&mut tape, &field, x, cfg, direction)?;
    Ok(PointSet::new(tensor_points(tape.value(out)), PointSource::External)?)
}

/// Velocity of the flow field at a single point.
pub fn velocity(mlp: &ImNetMlp, x: Vec3, t: f64, z: &[f64]) -> Result<Vec3, FlowError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(FlowError::Config(format!("t = {t} outside [0, 1]")));
    }
    let mut tape = Tape::new();
    let bound = mlp.bind(&mut tape, false);
    let xv = tape.constant(points_tensor(&[x]));
    let zv = tape.constant(Tensor::matrix(1, z.len(), z.to_vec())?);
    let field = LatentVelocity::new(&mut tape, &bound, zv)?;
    let v = field.eval(&mut tape, xv, t)?;
    let d = tape.value(v).data();
    Ok([d[0], d[1], d[2]])
}
