use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, AdamState, Tape, Tensor};
use crate::flow::{points_tensor, FlowConfig, FlowError, ImNetMlp, MlpConfig};
use crate::latent::{global_flow, local_flow, place_control_points, LatentState};
use crate::mesh::{chamfer_distance, ChamferMode, KdTree, PointSet, PointSource, SurfaceSampler, TriMesh};
use crate::rng::{derive_seed, rng_for};

use super::loss::{chamfer_loss, LossMode};
use super::model::{FlowSsmModel, NormalizationInfo};
use super::pca::fit_pca;
use super::SsmError;

/// Auto-decoder training settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    /// Epochs per stage.
    pub epochs: usize,
    pub lr: f64,
    /// Learning rate for the per-shape latents; `lr` when absent.
    pub latent_lr: Option<f64>,
    pub batch_size: usize,
    /// Surface points drawn from the template and from each target per step.
    pub n_sample_points: usize,
    pub latent_init_std: f64,
    pub d: usize,
    pub m_control_points: usize,
    pub initial_eps: f64,
    /// Train the local deformer after the global one.
    pub train_local: bool,
    /// Extra factor on the local network's output-layer init so the composed
    /// model starts close to the trained global stage.
    pub local_output_init_scale: f64,
    pub flow: FlowConfig,
    pub mlp: MlpConfig,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            lr: 1e-3,
            latent_lr: None,
            batch_size: 16,
            n_sample_points: 15_000,
            latent_init_std: 0.1,
            d: 128,
            m_control_points: 125,
            initial_eps: 2.5963,
            train_local: true,
            local_output_init_scale: 0.01,
            flow: FlowConfig::default(),
            mlp: MlpConfig::default(),
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), SsmError> {
        let positive = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("n_sample_points", self.n_sample_points),
            ("d", self.d),
            ("m_control_points", self.m_control_points),
            ("flow.n_steps", self.flow.n_steps),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(SsmError::Config(format!("{name} must be positive")));
        }
        let reals = [
            ("lr", self.lr),
            ("latent_lr", self.latent_lr.unwrap_or(self.lr)),
            ("latent_init_std", self.latent_init_std),
            ("initial_eps", self.initial_eps),
            ("local_output_init_scale", self.local_output_init_scale),
        ];
        if let Some((name, v)) = reals.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(SsmError::Config(format!("{name} must be positive, got {v}")));
        }
        Ok(())
    }

    fn latent_adam(&self) -> AdamConfig {
        AdamConfig::with_lr(self.latent_lr.unwrap_or(self.lr))
    }
}

/// Loss trajectory of a training run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Symmetric Chamfer of the randomly initialised model, averaged over shapes.
    pub initial_loss: f64,
    /// Mean per-step loss of each global-stage epoch.
    pub global_epochs: Vec<f64>,
    /// Global-only model after stage 1.
    pub stage1_final_loss: f64,
    /// Composed model before the first local update.
    pub stage2_initial_loss: f64,
    pub local_epochs: Vec<f64>,
    /// Composed model at the end of training.
    pub final_loss: f64,
}

pub struct TrainOutput {
    pub model: FlowSsmModel,
    pub history: TrainHistory,
}

const STAGE_GLOBAL: u64 = 1;
const STAGE_LOCAL: u64 = 2;
const EVAL_STREAM: u64 = 99;

/// Tolerance on the [-1, 1] box check for preprocessed inputs.
const BOX_TOL: f64 = 1e-6;

fn check_normalized(meshes: &[TriMesh], what: &str) -> Result<(), SsmError> {
    for (i, m) in meshes.iter().enumerate() {
        let (lo, hi) = m.bounds();
        if lo.iter().chain(&hi).any(|c| c.abs() > 1.0 + BOX_TOL) {
            return Err(SsmError::Data(format!(
                "{what} {i} is not normalized to [-1, 1] (bounds {lo:?} .. {hi:?})"
            )));
        }
    }
    Ok(())
}

/// Symmetric Chamfer between deformed template samples and target samples,
/// averaged over shapes. Deterministic in `seed`.
pub fn mean_reconstruction_loss(
    model: &FlowSsmModel,
    latents: &[LatentState],
    shapes: &[TriMesh],
    use_local: bool,
    n_points: usize,
    seed: u64,
) -> Result<f64, SsmError> {
    let tsampler = SurfaceSampler::new(&model.template);
    let losses = shapes
        .par_iter()
        .zip(latents)
        .enumerate()
        .map(|(i, (shape, lat))| {
            let mut rng = rng_for(seed, &[EVAL_STREAM, i as u64]);
            let src = tsampler.sample(n_points, &mut rng);
            let tgt = SurfaceSampler::new(shape).sample(n_points, &mut rng);
            let def = model.deform_points(&src, lat, use_local)?;
            Ok(chamfer_distance(
                &PointSet::new(def, PointSource::External)?,
                &PointSet::new(tgt, PointSource::MeshSampled)?,
                ChamferMode::Symmetric,
            ))
        })
        .collect::<Result<Vec<f64>, SsmError>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

struct StepGrads {
    loss: f64,
    shared: Vec<Tensor>,
    latent: Tensor,
}

fn global_step(
    model: &FlowSsmModel,
    latent: &LatentState,
    template: &SurfaceSampler<'_>,
    target: &SurfaceSampler<'_>,
    n: usize,
    rng: &mut impl rand::Rng,
) -> Result<StepGrads, FlowError> {
    let src = template.sample(n, rng);
    let tgt = target.sample(n, rng);
    let tree = KdTree::new(&tgt);
    let mut tape = Tape::new();
    let gm = model.mlp_global.bind(&mut tape, true);
    let z = tape.leaf(Tensor::matrix(1, model.d, latent.z_global.clone())?);
    let x = tape.constant(points_tensor(&src));
    let y = global_flow(&mut tape, &gm, x, z, &model.flow)?;
    let loss = chamfer_loss(&mut tape, y, &tgt, &tree, LossMode::Symmetric)?;
    let g = tape.backward(loss)?;
    Ok(StepGrads {
        loss: tape.value(loss).item(),
        shared: gm.vars.iter().map(|&v| g.wrt(&tape, v)).collect(),
        latent: g.wrt(&tape, z),
    })
}

fn local_step(
    model: &FlowSsmModel,
    latent: &LatentState,
    template: &SurfaceSampler<'_>,
    target: &SurfaceSampler<'_>,
    n: usize,
    rng: &mut impl rand::Rng,
) -> Result<StepGrads, FlowError> {
    let src = template.sample(n, rng);
    let tgt = target.sample(n, rng);
    let tree = KdTree::new(&tgt);
    let mut tape = Tape::new();
    let gm = model.mlp_global.bind(&mut tape, false);
    let zg = tape.constant(Tensor::matrix(1, model.d, latent.z_global.clone())?);
    let x = tape.constant(points_tensor(&src));
    let y1 = global_flow(&mut tape, &gm, x, zg, &model.flow)?;
    let lm = model.mlp_local.bind(&mut tape, true);
    let c = tape.constant(model.cps.positions_tensor());
    let e = tape.leaf(model.cps.widths_tensor());
    let zl = tape.leaf(latent.z_local.clone());
    let y = local_flow(&mut tape, &lm, y1, c, e, zl, &model.flow)?;
    let loss = chamfer_loss(&mut tape, y, &tgt, &tree, LossMode::Symmetric)?;
    let g = tape.backward(loss)?;
    let mut shared: Vec<Tensor> = lm.vars.iter().map(|&v| g.wrt(&tape, v)).collect();
    shared.push(g.wrt(&tape, e));
    Ok(StepGrads {
        loss: tape.value(loss).item(),
        shared,
        latent: g.wrt(&tape, zl),
    })
}

fn run_stage(
    model: &mut FlowSsmModel,
    latents: &mut [LatentState],
    shapes: &[TriMesh],
    cfg: &TrainingConfig,
    stage: u64,
) -> Result<Vec<f64>, SsmError> {
    let n = shapes.len();
    let local = stage == STAGE_LOCAL;
    let shared_init: Vec<Tensor> = if local {
        let mut p = model.mlp_local.params().to_vec();
        p.push(model.cps.widths_tensor());
        p
    } else {
        model.mlp_global.params().to_vec()
    };
    let mut shared_adam = AdamState::new(AdamConfig::with_lr(cfg.lr), &shared_init);
    let latent_tensor = |l: &LatentState| {
        if local {
            l.z_local.clone()
        } else {
            Tensor::matrix(1, l.d(), l.z_global.clone()).expect("1×d")
        }
    };
    let mut latent_adam: Vec<AdamState> = latents
        .iter()
        .map(|l| AdamState::new(cfg.latent_adam(), &[latent_tensor(l)]))
        .collect();
    let samplers: Vec<SurfaceSampler<'_>> = shapes.iter().map(SurfaceSampler::new).collect();
    let template = model.template.clone();
    let tsampler = SurfaceSampler::new(&template);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng_for(cfg.seed, &[stage, epoch as u64, u64::MAX]));
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let snapshot = &*model;
            let results: Vec<StepGrads> = batch
                .par_iter()
                .map(|&i| {
                    let mut rng = rng_for(cfg.seed, &[stage, epoch as u64, i as u64]);
                    let step = if local { local_step } else { global_step };
                    step(snapshot, &latents[i], &tsampler, &samplers[i], cfg.n_sample_points, &mut rng).map_err(|e| {
                        SsmError::NonFiniteLoss(format!("stage {stage}, epoch {epoch}, shape {i}: {e}"))
                    })
                })
                .collect::<Result<_, _>>()?;

            let inv = 1.0 / batch.len() as f64;
            let mut shared: Vec<Tensor> = results[0].shared.clone();
            for r in &results[1..] {
                for (acc, g) in shared.iter_mut().zip(&r.shared) {
                    for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a += b;
                    }
                }
            }
            for g in &mut shared {
                g.data_mut().iter_mut().for_each(|v| *v *= inv);
            }
            if local {
                let mut params = model.mlp_local.params().to_vec();
                params.push(model.cps.widths_tensor());
                shared_adam.step(&mut params, &shared);
                let eps = params.pop().expect("eps tensor");
                // the kernel depends on ε², keep the positive representative
                model.cps.inv_widths = eps.data().iter().map(|e| e.abs().max(f64::MIN_POSITIVE)).collect();
                model.mlp_local.params_mut().clone_from_slice(&params);
            } else {
                shared_adam.step(model.mlp_global.params_mut(), &shared);
            }
            for (&i, r) in batch.iter().zip(&results) {
                let mut g = r.latent.clone();
                g.data_mut().iter_mut().for_each(|v| *v *= inv);
                let mut p = [latent_tensor(&latents[i])];
                latent_adam[i].step(&mut p, &[g]);
                let [p] = p;
                if local {
                    latents[i].z_local = p;
                } else {
                    latents[i].z_global = p.into_data();
                }
                loss_sum += r.loss;
            }
        }
        let mean = loss_sum / n as f64;
        if !mean.is_finite() {
            return Err(SsmError::NonFiniteLoss(format!("stage {stage}, epoch {epoch}: mean loss {mean}")));
        }
        log::info!("stage {stage} epoch {epoch}: loss {mean:.6}");
        epoch_losses.push(mean);
    }
    Ok(epoch_losses)
}

fn init_latents(n: usize, cfg: &TrainingConfig) -> Vec<LatentState> {
    let normal = Normal::new(0.0, cfg.latent_init_std).expect("positive std");
    (0..n)
        .map(|i| {
            let mut rng = rng_for(cfg.seed, &[0, i as u64]);
            let zg = (0..cfg.d).map(|_| normal.sample(&mut rng)).collect();
            let zl = (0..cfg.m_control_points * cfg.d).map(|_| normal.sample(&mut rng)).collect();
            LatentState {
                z_global: zg,
                z_local: Tensor::matrix(cfg.m_control_points, cfg.d, zl).expect("M×d"),
            }
        })
        .collect()
}

/// Fresh, untrained model with randomly initialised weights and control
/// points placed on `template`.
pub fn init_model(template: &TriMesh, cfg: &TrainingConfig) -> Result<FlowSsmModel, SsmError> {
    cfg.validate()?;
    let input = 3 + cfg.d;
    let local_mlp = MlpConfig {
        output_init_scale: cfg.mlp.output_init_scale * cfg.local_output_init_scale,
        ..cfg.mlp.clone()
    };
    let cps = place_control_points(template, cfg.m_control_points, cfg.initial_eps, derive_seed(cfg.seed, &[3]))?;
    Ok(FlowSsmModel {
        template: template.clone(),
        d: cfg.d,
        flow: cfg.flow,
        mlp_global: ImNetMlp::new(input, cfg.mlp.clone(), derive_seed(cfg.seed, &[1])),
        mlp_local: ImNetMlp::new(input, local_mlp, derive_seed(cfg.seed, &[2])),
        cps,
        pca_global: None,
        pca_local: None,
        normalization: NormalizationInfo::identity(),
        training_latents: Vec::new(),
        config: cfg.clone(),
    })
}

/// Auto-decoder training: the global deformer and latents first, then the
/// local deformer, inverse widths and local latents on top of the frozen
/// global stage; finally separate PCAs of the global and local latents.
pub fn train(shapes: &[TriMesh], template: &TriMesh, cfg: &TrainingConfig) -> Result<TrainOutput, SsmError> {
    if shapes.len() < 2 {
        return Err(SsmError::Data(format!("training needs at least 2 shapes, got {}", shapes.len())));
    }
    check_normalized(shapes, "shape")?;
    check_normalized(std::slice::from_ref(template), "template")?;
    let mut model = init_model(template, cfg)?;
    let mut latents = init_latents(shapes.len(), cfg);
    let eval_n = cfg.n_sample_points;
    let mut history = TrainHistory {
        initial_loss: mean_reconstruction_loss(&model, &latents, shapes, false, eval_n, cfg.seed)?,
        ..Default::default()
    };

    history.global_epochs = run_stage(&mut model, &mut latents, shapes, cfg, STAGE_GLOBAL)?;
    history.stage1_final_loss = mean_reconstruction_loss(&model, &latents, shapes, false, eval_n, cfg.seed)?;

    if cfg.train_local {
        history.stage2_initial_loss = mean_reconstruction_loss(&model, &latents, shapes, true, eval_n, cfg.seed)?;
        history.local_epochs = run_stage(&mut model, &mut latents, shapes, cfg, STAGE_LOCAL)?;
        history.final_loss = mean_reconstruction_loss(&model, &latents, shapes, true, eval_n, cfg.seed)?;
    } else {
        history.stage2_initial_loss = history.stage1_final_loss;
        history.final_loss = history.stage1_final_loss;
    }

    let zg: Vec<Vec<f64>> = latents.iter().map(|l| l.z_global.clone()).collect();
    let zl: Vec<Vec<f64>> = latents.iter().map(|l| l.z_local.data().to_vec()).collect();
    let pg = fit_pca(&zg)?;
    let pl = fit_pca(&zl)?;
    if pg.degenerate || pl.degenerate {
        log::warn!("latent PCA is degenerate (identical latents)");
    }
    model.pca_global = Some(pg.basis);
    model.pca_local = Some(pl.basis);
    model.training_latents = latents;
    Ok(TrainOutput { model, history })
}
