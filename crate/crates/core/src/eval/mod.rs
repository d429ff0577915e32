//! Generality, specificity, self-intersection counts, the global versus
//! global+local ablation and linear-SVM classification of PCA weights.

mod stats;
mod svm;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Tensor;
use crate::latent::LatentState;
use crate::mesh::{
    average_symmetric_surface_distance, chamfer_distance, count_self_intersections, sample_surface, ChamferMode,
    MeshError, PointSet, TriMesh,
};
use crate::rng::{derive_seed, rng_for};
use crate::ssm::{fit_latent, sample_shape, train, FitConfig, FlowSsmModel, SsmError, TrainOutput, TrainingConfig};

pub use stats::{mean_std, paired_t_test, PairedTTest};
pub use svm::{accuracy_csv, classify_monte_carlo, train_svm, ClassifyConfig, FractionAccuracy, LinearSvm, DEFAULT_LAMBDA};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("labels contain a single class")]
    DegenerateLabels,
    #[error("invalid evaluation input: {0}")]
    Data(String),
    #[error(transparent)]
    Ssm(#[from] SsmError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub fit: FitConfig,
    /// Surface samples of each test mesh used as the fitting target.
    pub target_points: usize,
    /// Samples per surface for ASSD.
    pub assd_samples: usize,
    pub n_specificity_samples: usize,
    /// Samples per mesh for the specificity Chamfer.
    pub specificity_points: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            target_points: 15_000,
            assd_samples: 15_000,
            n_specificity_samples: 1_000,
            specificity_points: 15_000,
            seed: 0,
        }
    }
}

/// One evaluated mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeRecord {
    pub index: usize,
    /// Distance in normalized units.
    pub value: f64,
    /// Same distance in model units (e.g. mm).
    pub value_mm: f64,
    pub self_intersecting: bool,
    pub intersecting_pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub mean_mm: f64,
    pub std_mm: f64,
    /// Meshes with at least one intersecting face pair.
    pub sim_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub summary: Summary,
    pub records: Vec<ShapeRecord>,
}

impl ArmReport {
    fn from_records(records: Vec<ShapeRecord>) -> Self {
        let v: Vec<f64> = records.iter().map(|r| r.value).collect();
        let mm: Vec<f64> = records.iter().map(|r| r.value_mm).collect();
        let (mean, std) = mean_std(&v);
        let (mean_mm, std_mm) = mean_std(&mm);
        Self {
            summary: Summary {
                n: records.len(),
                mean,
                std,
                mean_mm,
                std_mm,
                sim_count: records.iter().filter(|r| r.self_intersecting).count(),
            },
            records,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.value).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub generality: Option<ArmReport>,
    pub specificity: Option<ArmReport>,
    /// Echo of the settings that produced the report.
    pub config: serde_json::Value,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per evaluated mesh.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["metric", "index", "value", "value_mm", "self_intersecting", "intersecting_pairs"])
            .expect("in-memory write");
        for (name, arm) in [("generality", &self.generality), ("specificity", &self.specificity)] {
            for r in arm.iter().flat_map(|a| &a.records) {
                w.write_record([
                    name.to_string(),
                    r.index.to_string(),
                    r.value.to_string(),
                    r.value_mm.to_string(),
                    r.self_intersecting.to_string(),
                    r.intersecting_pairs.to_string(),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

fn record(model: &FlowSsmModel, index: usize, value: f64, mesh: &TriMesh) -> ShapeRecord {
    let sim = count_self_intersections(mesh);
    ShapeRecord {
        index,
        value,
        value_mm: model.normalization.to_model_units(value),
        self_intersecting: sim.is_self_intersecting,
        intersecting_pairs: sim.intersecting_face_pairs,
    }
}

/// Fits every test shape once and scores both the global-only stage and,
/// when the fit includes it, the composed model.
fn fit_and_score(
    model: &FlowSsmModel,
    shapes: &[TriMesh],
    cfg: &EvalConfig,
) -> Result<Vec<(ShapeRecord, Option<ShapeRecord>)>, EvalError> {
    shapes
        .par_iter()
        .enumerate()
        .map(|(i, shape)| {
            let target = sample_surface(shape, cfg.target_points, derive_seed(cfg.seed, &[1, i as u64]));
            let fit_cfg = FitConfig {
                seed: derive_seed(cfg.fit.seed, &[i as u64]),
                ..cfg.fit.clone()
            };
            let fit = fit_latent(model, &target, &fit_cfg)?;
            let assd_seed = derive_seed(cfg.seed, &[2, i as u64]);
            let global_mesh = model.deform_template(&fit.latent, false)?;
            let global = record(
                model,
                i,
                average_symmetric_surface_distance(&global_mesh, shape, cfg.assd_samples, assd_seed),
                &global_mesh,
            );
            let full = fit_cfg.fit_local.then(|| {
                record(
                    model,
                    i,
                    average_symmetric_surface_distance(&fit.mesh, shape, cfg.assd_samples, assd_seed),
                    &fit.mesh,
                )
            });
            Ok((global, full))
        })
        .collect()
}

/// Fits each held-out shape (symmetric loss unless configured otherwise)
/// and reports the ASSD between fitted and target surfaces.
pub fn evaluate_generality(model: &FlowSsmModel, test_shapes: &[TriMesh], cfg: &EvalConfig) -> Result<ArmReport, EvalError> {
    let recs = fit_and_score(model, test_shapes, cfg)?;
    Ok(ArmReport::from_records(
        recs.into_iter().map(|(g, full)| full.unwrap_or(g)).collect(),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub global_only: ArmReport,
    pub global_local: ArmReport,
    /// Paired test of global+local against global-only errors.
    pub paired_test: Option<PairedTTest>,
}

/// Global-only versus global+local generality of one trained model. Both
/// arms share the stage-1 network; the global-only arm is the global stage
/// of each fit, which is exactly what a global-only fit would produce.
pub fn ablation_from_model(model: &FlowSsmModel, test_shapes: &[TriMesh], cfg: &EvalConfig) -> Result<AblationReport, EvalError> {
    let cfg = EvalConfig {
        fit: FitConfig {
            fit_local: true,
            ..cfg.fit.clone()
        },
        ..cfg.clone()
    };
    let recs = fit_and_score(model, test_shapes, &cfg)?;
    let (g, gl): (Vec<_>, Vec<_>) = recs.into_iter().map(|(g, f)| (g, f.expect("local fit"))).unzip();
    let global_only = ArmReport::from_records(g);
    let global_local = ArmReport::from_records(gl);
    let paired_test = paired_t_test(&global_local.values(), &global_only.values());
    Ok(AblationReport {
        global_only,
        global_local,
        paired_test,
    })
}

/// Trains on `train_shapes` and runs [`ablation_from_model`] on `test_shapes`.
pub fn ablate_global_vs_local(
    train_shapes: &[TriMesh],
    test_shapes: &[TriMesh],
    template: &TriMesh,
    train_cfg: &TrainingConfig,
    cfg: &EvalConfig,
) -> Result<(TrainOutput, AblationReport), EvalError> {
    let trained = train(
        train_shapes,
        template,
        &TrainingConfig {
            train_local: true,
            ..train_cfg.clone()
        },
    )?;
    let report = ablation_from_model(&trained.model, test_shapes, cfg)?;
    Ok((trained, report))
}

/// How latents are drawn for specificity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentSampling {
    /// Independent Gaussian coefficients per PCA mode.
    Pca,
    /// Each latent coordinate uniform within the range spanned by the
    /// training latents; a reference that ignores the learned distribution.
    UniformBox,
}

fn uniform_box_latent(model: &FlowSsmModel, rng: &mut impl Rng) -> Result<LatentState, EvalError> {
    let lats = &model.training_latents;
    if lats.is_empty() {
        return Err(EvalError::Data("model has no training latents".into()));
    }
    let draw = |rng: &mut dyn rand::RngCore, col: &dyn Fn(&LatentState) -> &[f64]| -> Vec<f64> {
        let dim = col(&lats[0]).len();
        (0..dim)
            .map(|j| {
                let (lo, hi) = lats
                    .iter()
                    .map(|l| col(l)[j])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                if hi > lo {
                    rng.random_range(lo..=hi)
                } else {
                    lo
                }
            })
            .collect()
    };
    let zg = draw(rng, &|l| &l.z_global);
    let zl = draw(rng, &|l| l.z_local.data());
    Ok(LatentState {
        z_global: zg,
        z_local: Tensor::matrix(model.m(), model.d, zl).map_err(SsmError::from)?,
    })
}

/// Decodes `cfg.n_specificity_samples` random latents and reports, for each
/// resulting mesh, the symmetric Chamfer to the closest training shape.
pub fn evaluate_specificity(
    model: &FlowSsmModel,
    training_shapes: &[TriMesh],
    cfg: &EvalConfig,
    sampling: LatentSampling,
) -> Result<ArmReport, EvalError> {
    if training_shapes.is_empty() {
        return Err(EvalError::Data("no training shapes".into()));
    }
    let n_pts = cfg.specificity_points;
    let refs: Vec<PointSet> = training_shapes
        .par_iter()
        .enumerate()
        .map(|(j, m)| sample_surface(m, n_pts, derive_seed(cfg.seed, &[3, j as u64])))
        .collect();
    let records = (0..cfg.n_specificity_samples)
        .into_par_iter()
        .map(|i| {
            let sample_seed = derive_seed(cfg.seed, &[4, i as u64]);
            let mesh = match sampling {
                LatentSampling::Pca => sample_shape(model, sample_seed)?.0,
                LatentSampling::UniformBox => {
                    let lat = uniform_box_latent(model, &mut rng_for(sample_seed, &[]))?;
                    model.deform_template(&lat, true)?
                }
            };
            let pts = sample_surface(&mesh, n_pts, derive_seed(cfg.seed, &[5, i as u64]));
            let best = refs
                .iter()
                .map(|r| chamfer_distance(&pts, r, ChamferMode::Symmetric))
                .fold(f64::INFINITY, f64::min);
            Ok(record(model, i, best, &mesh))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(ArmReport::from_records(records))
}

/// Symmetric Chamfer between two independent samplings of the same mesh:
/// the floor below which specificity cannot be resolved.
pub fn chamfer_noise_floor(mesh: &TriMesh, n_points: usize, seed: u64) -> f64 {
    let a = sample_surface(mesh, n_points, derive_seed(seed, &[0]));
    let b = sample_surface(mesh, n_points, derive_seed(seed, &[1]));
    chamfer_distance(&a, &b, ChamferMode::Symmetric)
}
