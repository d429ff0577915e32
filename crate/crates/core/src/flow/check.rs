use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::integrate::{integrate, points_tensor, Direction, FlowConfig, LatentVelocity};
use super::{FlowError, ImNetMlp};
use crate::autodiff::{Tape, Tensor};
use crate::mesh::{PointSet, Vec3};

/// Outcome of comparing backprop gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientCheck {
    pub max_rel_error: f64,
    pub probes: usize,
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

const TARGET_OFFSET: Vec3 = [0.1, -0.05, 0.02];

fn loss_and_grads(
    mlp: &ImNetMlp,
    x0: &[Vec3],
    z: &Tensor,
    cfg: &FlowConfig,
    want_grads: bool,
) -> Result<(f64, Vec<Tensor>, Tensor), FlowError> {
    let mut tape = Tape::new();
    let bound = mlp.bind(&mut tape, want_grads);
    let zv = if want_grads { tape.leaf(z.clone()) } else { tape.constant(z.clone()) };
    let x = tape.constant(points_tensor(x0));
    let field = LatentVelocity::new(&mut tape, &bound, zv)?;
    let out = integrate(&mut tape, &field, x, cfg, Direction::Forward)?;
    let targets: Vec<Vec3> = x0
        .iter()
        .map(|p| [p[0] + TARGET_OFFSET[0], p[1] + TARGET_OFFSET[1], p[2] + TARGET_OFFSET[2]])
        .collect();
    let y = tape.constant(points_tensor(&targets));
    let diff = tape.sub(out, y)?;
    let norms = tape.row_norms(diff)?;
    let loss = tape.mean(norms)?;
    let value = tape.value(loss).item();
    if !want_grads {
        return Ok((value, Vec::new(), Tensor::scalar(0.0)));
    }
    let g = tape.backward(loss)?;
    let gp = bound.vars.iter().map(|&v| g.wrt(&tape, v)).collect();
    Ok((value, gp, g.wrt(&tape, zv)))
}

/// Compares backprop gradients of a distance loss on the flowed points
/// against central finite differences, for `max_probes` randomly chosen MLP
/// weights plus every latent entry.
pub fn flow_jacobian_check(
    mlp: &ImNetMlp,
    x0: &PointSet,
    latent_fn: impl Fn(Vec3) -> Vec<f64>,
    cfg: &FlowConfig,
    max_probes: usize,
    seed: u64,
) -> Result<GradientCheck, FlowError> {
    const H: f64 = 1e-6;
    const FLOOR: f64 = 1e-6;
    let d = mlp.input_dim() - 3;
    let pts = x0.points();
    let mut zdata = Vec::with_capacity(pts.len() * d);
    for &p in pts {
        zdata.extend(latent_fn(p));
    }
    let z = Tensor::matrix(pts.len(), d, zdata)?;
    let (_, gparams, gz) = loss_and_grads(mlp, pts, &z, cfg, true)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_err = 0.0f64;
    let mut probes = 0;
    let total: usize = mlp.params().iter().map(Tensor::len).sum();
    for _ in 0..max_probes.min(total) {
        let mut flat = rng.random_range(0..total);
        let mut which = 0;
        while flat >= mlp.params()[which].len() {
            flat -= mlp.params()[which].len();
            which += 1;
        }
        let eval = |delta: f64| -> Result<f64, FlowError> {
            let mut m = mlp.clone();
            m.params_mut()[which].data_mut()[flat] += delta;
            Ok(loss_and_grads(&m, pts, &z, cfg, false)?.0)
        };
        let fd = (eval(H)? - eval(-H)?) / (2.0 * H);
        max_err = max_err.max(relative_error(gparams[which].data()[flat], fd, FLOOR));
        probes += 1;
    }
    for k in 0..z.len() {
        let eval = |delta: f64| -> Result<f64, FlowError> {
            let mut zz = z.clone();
            zz.data_mut()[k] += delta;
            Ok(loss_and_grads(mlp, pts, &zz, cfg, false)?.0)
        };
        let fd = (eval(H)? - eval(-H)?) / (2.0 * H);
        max_err = max_err.max(relative_error(gz.data()[k], fd, FLOOR));
        probes += 1;
    }
    Ok(GradientCheck {
        max_rel_error: max_err,
        probes,
    })
}
