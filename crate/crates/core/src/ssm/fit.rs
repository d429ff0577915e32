use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, AdamState, Tape, Tensor, Var};
use crate::flow::{points_tensor, FlowError};
use crate::latent::{global_flow, local_flow, LatentState};
use crate::mesh::{KdTree, PointSet, SurfaceSampler, TriMesh};
use crate::rng::rng_for;

use super::loss::{chamfer_loss, LossMode};
use super::model::FlowSsmModel;
use super::pca::PcaBasis;
use super::SsmError;

/// Inference settings for fitting a new shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Iterations per stage.
    pub iters: usize,
    pub lr: f64,
    /// Std of the initial PCA coefficients.
    pub init_std: f64,
    /// Template surface points drawn per iteration.
    pub n_sample_points: usize,
    pub loss_mode: LossMode,
    /// Fit the local stage after the global one.
    pub fit_local: bool,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            iters: 600,
            lr: 1e-2,
            init_std: 0.1,
            n_sample_points: 15_000,
            loss_mode: LossMode::Symmetric,
            fit_local: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub latent: LatentState,
    pub global_weights: Vec<f64>,
    pub local_weights: Vec<f64>,
    pub mesh: TriMesh,
    /// Best loss reached in each stage.
    pub global_loss: f64,
    pub local_loss: Option<f64>,
    pub loss_history: Vec<f64>,
}

/// Latent = mean + wᵀU on the tape, reshaped to `shape`.
fn decode_on_tape(tape: &mut Tape, basis: &PcaBasis, w: Var, shape: &[usize]) -> Result<Var, FlowError> {
    let u = tape.constant(basis.components.clone());
    let mean = tape.constant(Tensor::matrix(1, basis.dim(), basis.mean.clone())?);
    let z = tape.matmul(w, u)?;
    let z = tape.add_row(z, mean)?;
    Ok(tape.reshape(z, shape)?)
}

fn init_weights(modes: usize, cfg: &FitConfig, stream: u64) -> Result<Vec<f64>, SsmError> {
    let normal = Normal::new(0.0, cfg.init_std)
        .map_err(|e| SsmError::Config(format!("init_std: {e}")))?;
    let mut rng = rng_for(cfg.seed, &[stream]);
    Ok((0..modes).map(|_| normal.sample(&mut rng)).collect())
}

struct StageResult {
    best_w: Vec<f64>,
    best_loss: f64,
    history: Vec<f64>,
}

/// Adam over PCA coefficients, keeping the lowest-loss iterate.
fn optimize(
    modes: usize,
    cfg: &FitConfig,
    stream: u64,
    mut step: impl FnMut(&[f64], &mut rand_chacha::ChaCha8Rng) -> Result<(f64, Vec<f64>), FlowError>,
) -> Result<StageResult, SsmError> {
    let mut w = Tensor::matrix(1, modes, init_weights(modes, cfg, stream)?)?;
    let mut adam = AdamState::new(AdamConfig::with_lr(cfg.lr), std::slice::from_ref(&w));
    let mut rng = rng_for(cfg.seed, &[stream, 1]);
    let mut best = StageResult {
        best_w: w.data().to_vec(),
        best_loss: f64::INFINITY,
        history: Vec::with_capacity(cfg.iters),
    };
    for it in 0..cfg.iters.max(1) {
        let (loss, grad) = step(w.data(), &mut rng)
            .map_err(|e| SsmError::NonFiniteLoss(format!("fit stage {stream}, iteration {it}: {e}")))?;
        best.history.push(loss);
        if loss < best.best_loss {
            best.best_loss = loss;
            best.best_w = w.data().to_vec();
        }
        if it + 1 < cfg.iters {
            adam.step(std::slice::from_mut(&mut w), &[Tensor::matrix(1, modes, grad)?]);
        }
    }
    Ok(best)
}

/// Fits a latent to `target` with every latent restricted to the PCA span:
/// the PCA coefficients themselves are optimised, global first, then local
/// on top of the best global fit. Network weights and widths stay fixed.
pub fn fit_latent(model: &FlowSsmModel, target: &PointSet, cfg: &FitConfig) -> Result<FitResult, SsmError> {
    if cfg.iters == 0 || cfg.n_sample_points == 0 || !(cfg.lr > 0.0) {
        return Err(SsmError::Config("iters, n_sample_points and lr must be positive".into()));
    }
    let (pg, pl) = (model.pca_global()?, model.pca_local()?);
    let tgt = target.points();
    let tree = KdTree::new(tgt);
    let sampler = SurfaceSampler::new(&model.template);
    let n = cfg.n_sample_points;
    let (d, m) = (model.d, model.m());

    let global = optimize(pg.modes(), cfg, 1, |w, rng| {
        let src = sampler.sample(n, rng);
        let mut tape = Tape::new();
        let gm = model.mlp_global.bind(&mut tape, false);
        let wv = tape.leaf(Tensor::matrix(1, w.len(), w.to_vec())?);
        let z = decode_on_tape(&mut tape, pg, wv, &[1, d])?;
        let x = tape.constant(points_tensor(&src));
        let y = global_flow(&mut tape, &gm, x, z, &model.flow)?;
        let loss = chamfer_loss(&mut tape, y, tgt, &tree, cfg.loss_mode)?;
        let g = tape.backward(loss)?;
        Ok((tape.value(loss).item(), g.wrt(&tape, wv).into_data()))
    })?;
    let z_global = pg.reconstruct(&global.best_w);
    let mut history = global.history;

    let (local_weights, local_loss) = if cfg.fit_local {
        let local = optimize(pl.modes(), cfg, 2, |w, rng| {
            let src = sampler.sample(n, rng);
            let mut tape = Tape::new();
            let gm = model.mlp_global.bind(&mut tape, false);
            let zg = tape.constant(Tensor::matrix(1, d, z_global.clone())?);
            let x = tape.constant(points_tensor(&src));
            let y1 = global_flow(&mut tape, &gm, x, zg, &model.flow)?;
            let lm = model.mlp_local.bind(&mut tape, false);
            let wv = tape.leaf(Tensor::matrix(1, w.len(), w.to_vec())?);
            let zl = decode_on_tape(&mut tape, pl, wv, &[m, d])?;
            let c = tape.constant(model.cps.positions_tensor());
            let e = tape.constant(model.cps.widths_tensor());
            let y = local_flow(&mut tape, &lm, y1, c, e, zl, &model.flow)?;
            let loss = chamfer_loss(&mut tape, y, tgt, &tree, cfg.loss_mode)?;
            let g = tape.backward(loss)?;
            Ok((tape.value(loss).item(), g.wrt(&tape, wv).into_data()))
        })?;
        history.extend(local.history);
        (local.best_w, Some(local.best_loss))
    } else {
        // local latent at the PCA mean
        (vec![0.0; pl.modes()], None)
    };

    let latent = LatentState {
        z_global,
        z_local: Tensor::matrix(m, d, pl.reconstruct(&local_weights))?,
    };
    let mesh = model.deform_template(&latent, cfg.fit_local)?;
    Ok(FitResult {
        latent,
        global_weights: global.best_w,
        local_weights,
        mesh,
        global_loss: global.best_loss,
        local_loss,
        loss_history: history,
    })
}
