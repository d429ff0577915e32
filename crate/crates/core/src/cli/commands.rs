use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::eval::{
    accuracy_csv, classify_monte_carlo, evaluate_generality, evaluate_specificity, ClassifyConfig, EvalConfig, EvalReport,
    LatentSampling,
};
use crate::mesh::geom::Vec3;
use crate::mesh::io::write_obj;
use crate::mesh::{icp_align, load_mesh_auto, normalize_to_unit_box, sample_surface, PointSet, TriMesh};
use crate::rng::derive_seed;
use crate::ssm::{fit_latent, sample_shape, FitConfig, FlowSsmModel, LossMode, NormalizationInfo, TrainingConfig};
use crate::synth::{generate_family, write_family, FamilyKind, FamilySpec};

use super::meta::{hash_inputs, write_run_json, DirLock, RunRecord};
use super::{list_meshes, write_file, CliError, LossModeArg};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const PREPROCESS_MANIFEST: &str = "preprocess.json";
const MODEL_FILE: &str = "model.flowssm";

fn names(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

fn is_template_file(p: &Path) -> bool {
    p.file_stem().is_some_and(|s| s == "template")
}

/// Shape files of a dataset directory, skipping `template.*`.
fn list_shapes(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("{} is not a directory", dir.display())));
    }
    let v: Vec<PathBuf> = list_meshes(dir)?.into_iter().filter(|p| !is_template_file(p)).collect();
    if v.is_empty() {
        return Err(CliError::Usage(format!("no .obj or .ply meshes in {}", dir.display())));
    }
    Ok(v)
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<TriMesh>, CliError> {
    paths
        .iter()
        .map(|p| load_mesh_auto(p).map_err(|e| CliError::io(p, e)))
        .collect()
}

fn load_model(path: &Path) -> Result<FlowSsmModel, CliError> {
    FlowSsmModel::load(path).map_err(|e| CliError::io(path, e))
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} {} does not exist", path.display())))
    }
}

// ---------------------------------------------------------------- preprocess

#[derive(Args, Debug, Serialize)]
pub struct PreprocessArgs {
    /// Directory of raw meshes.
    #[arg(long)]
    pub input_dir: PathBuf,
    /// Template mesh all shapes are aligned to.
    #[arg(long)]
    pub template: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub icp_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub icp_tol: f64,
}

#[derive(Serialize, Deserialize)]
struct PreprocessManifest {
    input_hash: String,
    /// Normalized length = input length × scale.
    scale: f64,
    template: PreprocessedShape,
    shapes: Vec<PreprocessedShape>,
}

#[derive(Serialize, Deserialize)]
struct PreprocessedShape {
    source: String,
    file: String,
    center: Vec3,
    rotation: [[f64; 3]; 3],
    translation: Vec3,
    icp_rms: f64,
}

pub fn preprocess(a: &PreprocessArgs) -> Result<(), CliError> {
    require_file(&a.template, "template")?;
    if a.input_dir.join(PREPROCESS_MANIFEST).is_file() {
        log::info!("{} is already preprocessed; nothing to do", a.input_dir.display());
        return Ok(());
    }
    let template_abs = a.template.canonicalize().map_err(|e| CliError::io(&a.template, e))?;
    let files: Vec<PathBuf> = list_meshes(&a.input_dir)?
        .into_iter()
        .filter(|p| p.canonicalize().map(|c| c != template_abs).unwrap_or(true))
        .collect();
    if files.is_empty() {
        return Err(CliError::Usage(format!("no meshes in {}", a.input_dir.display())));
    }
    let mut inputs = vec![a.template.clone()];
    inputs.extend(files.iter().cloned());
    let input_hash = hash_inputs(&inputs)?;
    let manifest_path = a.out_dir.join(PREPROCESS_MANIFEST);
    if let Ok(bytes) = std::fs::read(&manifest_path) {
        if serde_json::from_slice::<PreprocessManifest>(&bytes).is_ok_and(|m| m.input_hash == input_hash) {
            log::info!("{} is up to date; nothing to do", a.out_dir.display());
            return Ok(());
        }
    }

    let template = load_mesh_auto(&a.template).map_err(|e| CliError::io(&a.template, e))?;
    let meshes = load_all(&files)?;
    let _lock = DirLock::acquire(&a.out_dir)?;
    let aligned: Vec<_> = meshes
        .iter()
        .map(|m| icp_align(m, &template, a.icp_iters, a.icp_tol))
        .collect::<Result<_, _>>()?;
    for (f, r) in files.iter().zip(&aligned) {
        if let Some(w) = &r.warning {
            log::warn!("{}: {w}", f.display());
        }
    }
    let mut all = vec![template];
    all.extend(aligned.iter().map(|r| r.aligned.clone()));
    let norm = normalize_to_unit_box(&all, None)?;

    let mut outputs = Vec::new();
    let mut entries = Vec::new();
    for (i, mesh) in norm.meshes.iter().enumerate() {
        let (source, file, rotation, translation, rms) = if i == 0 {
            let id = crate::mesh::RigidTransform::identity();
            (a.template.clone(), "template.obj".to_string(), id.rotation, id.translation, 0.0)
        } else {
            let src = &files[i - 1];
            let stem = src.file_stem().expect("listed file").to_string_lossy();
            let r = &aligned[i - 1];
            (src.clone(), format!("{stem}.obj"), r.transform.rotation, r.transform.translation, r.rms)
        };
        let path = a.out_dir.join(&file);
        write_file(&path, write_obj(mesh).as_bytes())?;
        outputs.push(file.clone());
        entries.push(PreprocessedShape {
            source: source.display().to_string(),
            file,
            center: norm.centers[i],
            rotation,
            translation,
            icp_rms: rms,
        });
    }
    let template = entries.remove(0);
    let manifest = PreprocessManifest {
        input_hash: input_hash.clone(),
        scale: norm.scale,
        template,
        shapes: entries,
    };
    write_file(&manifest_path, serde_json::to_string_pretty(&manifest).expect("serializes").as_bytes())?;
    outputs.push(PREPROCESS_MANIFEST.into());
    write_run_json(
        &a.out_dir,
        &RunRecord {
            command: "preprocess",
            software_version: VERSION,
            seed: 0,
            input_hash,
            inputs: names(&inputs),
            outputs,
            config: a,
        },
    )
}

// --------------------------------------------------------------------- train

/// JSON run configuration of `train`. Relative paths are resolved against
/// the directory of the configuration file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub train_dir: PathBuf,
    /// Defaults to `template.obj` inside `train_dir`.
    #[serde(default)]
    pub template: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub training: TrainingConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &Path| if p.is_relative() { base.join(p) } else { p.to_path_buf() };
        cfg.train_dir = resolve(&cfg.train_dir);
        cfg.output_dir = resolve(&cfg.output_dir);
        cfg.template = cfg.template.as_deref().map(resolve);
        if cfg.training.seed != 0 && cfg.training.seed != cfg.seed {
            return Err(CliError::Config("training.seed conflicts with seed; set only the top-level seed".into()));
        }
        cfg.training.seed = cfg.seed;
        cfg.training.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
}

fn latents_csv(model: &FlowSsmModel, names: &[String]) -> Result<String, CliError> {
    let weights = model.training_pca_weights()?;
    let (kg, kl) = (model.pca_global()?.modes(), model.pca_local()?.modes());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["name".to_string()];
    header.extend((0..kg).map(|i| format!("g{i}")));
    header.extend((0..kl).map(|i| format!("l{i}")));
    w.write_record(&header).expect("in-memory write");
    for (name, row) in names.iter().zip(weights) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec).expect("in-memory write");
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8"))
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    require_file(&a.config, "config")?;
    let cfg = RunConfig::load(&a.config)?;
    let template_path = cfg.template.clone().unwrap_or_else(|| cfg.train_dir.join("template.obj"));
    require_file(&template_path, "template")?;
    let files = list_shapes(&cfg.train_dir)?;
    let mut inputs = vec![a.config.clone(), template_path.clone()];
    inputs.extend(files.iter().cloned());
    let input_hash = hash_inputs(&inputs)?;
    let template = load_mesh_auto(&template_path).map_err(|e| CliError::io(&template_path, e))?;
    let shapes = load_all(&files)?;
    let scale = match std::fs::read(cfg.train_dir.join(PREPROCESS_MANIFEST)) {
        Ok(bytes) => serde_json::from_slice::<PreprocessManifest>(&bytes)
            .map_err(|e| CliError::Config(format!("{PREPROCESS_MANIFEST}: {e}")))?
            .scale,
        Err(_) => 1.0,
    };

    let _lock = DirLock::acquire(&cfg.output_dir)?;
    let mut out = crate::ssm::train(&shapes, &template, &cfg.training)?;
    out.model.normalization = NormalizationInfo { scale };
    let model_path = cfg.output_dir.join(MODEL_FILE);
    out.model.save(&model_path).map_err(|e| CliError::io(&model_path, e))?;

    let mut loss = String::from("stage,epoch,loss\n");
    for (stage, v) in [("global", &out.history.global_epochs), ("local", &out.history.local_epochs)] {
        for (e, l) in v.iter().enumerate() {
            loss.push_str(&format!("{stage},{e},{l}\n"));
        }
    }
    write_file(&cfg.output_dir.join("loss.csv"), loss.as_bytes())?;
    let shape_names: Vec<String> = files
        .iter()
        .map(|p| p.file_stem().expect("listed file").to_string_lossy().into_owned())
        .collect();
    write_file(&cfg.output_dir.join("latents.csv"), latents_csv(&out.model, &shape_names)?.as_bytes())?;
    write_file(
        &cfg.output_dir.join("history.json"),
        serde_json::to_string_pretty(&out.history).expect("serializes").as_bytes(),
    )?;
    println!("final loss {}", out.history.final_loss);
    write_run_json(
        &cfg.output_dir,
        &RunRecord {
            command: "train",
            software_version: VERSION,
            seed: cfg.seed,
            input_hash,
            inputs: names(&inputs),
            outputs: vec![MODEL_FILE.into(), "loss.csv".into(), "latents.csv".into(), "history.json".into()],
            config: &cfg,
        },
    )
}

// ----------------------------------------------------------------------- fit

#[derive(Args, Debug, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Target mesh (.obj/.ply) or point cloud (.xyz, one point per line).
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, value_enum, default_value_t = LossModeArg::Symmetric)]
    pub loss_mode: LossModeArg,
    #[arg(long, default_value_t = 600)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub lr: f64,
    /// Template surface samples per iteration.
    #[arg(long, default_value_t = 15_000)]
    pub points: usize,
    /// Surface samples drawn from a target mesh.
    #[arg(long, default_value_t = 15_000)]
    pub target_points: usize,
    /// Fit only the global stage.
    #[arg(long)]
    pub global_only: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn is_point_file(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("xyz"))
}

fn load_points(path: &Path) -> Result<Vec<Vec3>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Io(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if v.len() < 3 {
            return Err(CliError::Io(format!("{}:{}: expected 3 coordinates", path.display(), i + 1)));
        }
        pts.push([v[0], v[1], v[2]]);
    }
    Ok(pts)
}

#[derive(Serialize)]
struct FitOutput<'a> {
    loss_mode: LossMode,
    global_weights: &'a [f64],
    local_weights: &'a [f64],
    z_global: &'a [f64],
    z_local: &'a [f64],
    global_loss: f64,
    local_loss: Option<f64>,
}

pub fn fit(a: &FitArgs) -> Result<(), CliError> {
    require_file(&a.model, "model")?;
    require_file(&a.target, "target")?;
    let model = load_model(&a.model)?;
    let points = is_point_file(&a.target);
    let target = if points {
        PointSet::external(load_points(&a.target)?)?
    } else {
        let mesh = load_mesh_auto(&a.target).map_err(|e| CliError::io(&a.target, e))?;
        sample_surface(&mesh, a.target_points, derive_seed(a.seed, &[0xf1]))
    };
    let loss_mode = match a.loss_mode {
        LossModeArg::Symmetric => LossMode::Symmetric,
        LossModeArg::OneSidedDeformedToTarget => LossMode::OneSidedDeformedToTarget,
        LossModeArg::OneSidedTargetToDeformed => LossMode::OneSidedTargetToDeformed,
        LossModeArg::OneSided if points => LossMode::OneSidedTargetToDeformed,
        LossModeArg::OneSided => LossMode::OneSidedDeformedToTarget,
    };
    let cfg = FitConfig {
        iters: a.iters,
        lr: a.lr,
        n_sample_points: a.points,
        loss_mode,
        fit_local: !a.global_only,
        seed: a.seed,
        ..FitConfig::default()
    };
    let inputs = vec![a.model.clone(), a.target.clone()];
    let input_hash = hash_inputs(&inputs)?;
    let _lock = DirLock::acquire(&a.out_dir)?;
    let r = fit_latent(&model, &target, &cfg)?;
    write_file(&a.out_dir.join("fitted.obj"), write_obj(&r.mesh).as_bytes())?;
    let out = FitOutput {
        loss_mode,
        global_weights: &r.global_weights,
        local_weights: &r.local_weights,
        z_global: &r.latent.z_global,
        z_local: r.latent.z_local.data(),
        global_loss: r.global_loss,
        local_loss: r.local_loss,
    };
    write_file(&a.out_dir.join("latent.json"), serde_json::to_string_pretty(&out).expect("serializes").as_bytes())?;
    write_run_json(
        &a.out_dir,
        &RunRecord {
            command: "fit",
            software_version: VERSION,
            seed: a.seed,
            input_hash,
            inputs: names(&inputs),
            outputs: vec!["fitted.obj".into(), "latent.json".into()],
            config: &serde_json::json!({ "args": a, "fit": cfg }),
        },
    )
}

// -------------------------------------------------------------------- sample

#[derive(Args, Debug, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn sample(a: &SampleArgs) -> Result<(), CliError> {
    require_file(&a.model, "model")?;
    let model = load_model(&a.model)?;
    let inputs = vec![a.model.clone()];
    let input_hash = hash_inputs(&inputs)?;
    let _lock = DirLock::acquire(&a.out_dir)?;
    let mut outputs = Vec::new();
    for i in 0..a.n {
        let (mesh, _) = sample_shape(&model, derive_seed(a.seed, &[i as u64]))?;
        let file = format!("sample_{i:04}.obj");
        write_file(&a.out_dir.join(&file), write_obj(&mesh).as_bytes())?;
        outputs.push(file);
    }
    write_run_json(
        &a.out_dir,
        &RunRecord {
            command: "sample",
            software_version: VERSION,
            seed: a.seed,
            input_hash,
            inputs: names(&inputs),
            outputs,
            config: a,
        },
    )
}

// ------------------------------------------------------------------ evaluate

#[derive(Args, Debug, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Held-out shapes for generality.
    #[arg(long)]
    pub test_dir: PathBuf,
    /// Training shapes; enables specificity.
    #[arg(long)]
    pub train_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub n_samples: usize,
    #[arg(long, default_value_t = 600)]
    pub fit_iters: usize,
    /// Template samples per fitting iteration.
    #[arg(long, default_value_t = 15_000)]
    pub points: usize,
    /// Surface samples per mesh for targets, ASSD and specificity.
    #[arg(long, default_value_t = 15_000)]
    pub eval_points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    require_file(&a.model, "model")?;
    let model = load_model(&a.model)?;
    let test_files = list_shapes(&a.test_dir)?;
    let train_files = a.train_dir.as_deref().map(list_shapes).transpose()?;
    let mut inputs = vec![a.model.clone()];
    inputs.extend(test_files.iter().cloned());
    inputs.extend(train_files.iter().flatten().cloned());
    let input_hash = hash_inputs(&inputs)?;
    let test = load_all(&test_files)?;
    let train = train_files.as_deref().map(load_all).transpose()?;
    let cfg = EvalConfig {
        fit: FitConfig {
            iters: a.fit_iters,
            n_sample_points: a.points,
            seed: a.seed,
            ..FitConfig::default()
        },
        target_points: a.eval_points,
        assd_samples: a.eval_points,
        n_specificity_samples: a.n_samples,
        specificity_points: a.eval_points,
        seed: a.seed,
    };
    let _lock = DirLock::acquire(&a.out_dir)?;
    let report = EvalReport {
        generality: Some(evaluate_generality(&model, &test, &cfg)?),
        specificity: train
            .as_deref()
            .map(|t| evaluate_specificity(&model, t, &cfg, LatentSampling::Pca))
            .transpose()?,
        config: serde_json::to_value(&cfg).expect("serializes"),
    };
    write_file(&a.out_dir.join("report.json"), report.to_json().as_bytes())?;
    write_file(&a.out_dir.join("report.csv"), report.to_csv().as_bytes())?;
    write_run_json(
        &a.out_dir,
        &RunRecord {
            command: "evaluate",
            software_version: VERSION,
            seed: a.seed,
            input_hash,
            inputs: names(&inputs),
            outputs: vec!["report.json".into(), "report.csv".into()],
            config: a,
        },
    )
}

// ------------------------------------------------------------------ classify

#[derive(Args, Debug, Serialize)]
pub struct ClassifyArgs {
    /// CSV with a header; a leading `name` column is optional, the other
    /// columns are numeric features (e.g. `latents.csv` from `train`).
    #[arg(long)]
    pub features: PathBuf,
    /// CSV with a `label` column (±1 or 0/1), plus `name` to join on.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub fractions: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub n_splits: usize,
    #[arg(long, default_value_t = crate::eval::DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

type Table = (Vec<String>, Vec<Vec<String>>);

fn read_table(path: &Path) -> Result<Table, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let header = r
        .headers()
        .map_err(|e| CliError::io(path, e))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(|s| s.trim().to_string()).collect()))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::io(path, e))?;
    Ok((header, rows))
}

fn parse_f64(s: &str, path: &Path) -> Result<f64, CliError> {
    s.parse().map_err(|_| CliError::Config(format!("{}: not a number: {s:?}", path.display())))
}

pub fn classify(a: &ClassifyArgs) -> Result<(), CliError> {
    require_file(&a.features, "features")?;
    require_file(&a.labels, "labels")?;
    let (fh, frows) = read_table(&a.features)?;
    let (lh, lrows) = read_table(&a.labels)?;
    let named = fh.first().is_some_and(|h| h == "name");
    let skip = usize::from(named);
    let features: Vec<Vec<f64>> = frows
        .iter()
        .map(|r| r[skip..].iter().map(|s| parse_f64(s, &a.features)).collect())
        .collect::<Result<_, _>>()?;
    let label_col = lh
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| CliError::Config(format!("{}: no `label` column", a.labels.display())))?;
    let to_label = |s: &str| -> Result<i8, CliError> {
        match parse_f64(s, &a.labels)? {
            v if v == 1.0 => Ok(1),
            v if v == -1.0 || v == 0.0 => Ok(-1),
            v => Err(CliError::Config(format!("label {v} is not ±1 or 0/1"))),
        }
    };
    let labels: Vec<i8> = match (named, lh.iter().position(|h| h == "name")) {
        (true, Some(name_col)) => {
            let map: HashMap<&str, &str> = lrows.iter().map(|r| (r[name_col].as_str(), r[label_col].as_str())).collect();
            frows
                .iter()
                .map(|r| {
                    map.get(r[0].as_str())
                        .ok_or_else(|| CliError::Config(format!("no label for {:?}", r[0])))
                        .and_then(|s| to_label(s))
                })
                .collect::<Result<_, _>>()?
        }
        _ => {
            if lrows.len() != frows.len() {
                return Err(CliError::Config(format!(
                    "{} feature rows but {} labels",
                    frows.len(),
                    lrows.len()
                )));
            }
            lrows.iter().map(|r| to_label(&r[label_col])).collect::<Result<_, _>>()?
        }
    };
    let inputs = vec![a.features.clone(), a.labels.clone()];
    let input_hash = hash_inputs(&inputs)?;
    let cfg = ClassifyConfig {
        fractions: a.fractions.clone(),
        n_splits: a.n_splits,
        lambda: a.lambda,
        seed: a.seed,
    };
    let _lock = DirLock::acquire(&a.out_dir)?;
    let acc = classify_monte_carlo(&features, &labels, &cfg)?;
    write_file(&a.out_dir.join("accuracy.csv"), accuracy_csv(&acc).as_bytes())?;
    write_run_json(
        &a.out_dir,
        &RunRecord {
            command: "classify",
            software_version: VERSION,
            seed: a.seed,
            input_hash,
            inputs: names(&inputs),
            outputs: vec!["accuracy.csv".into()],
            config: a,
        },
    )
}

// --------------------------------------------------------------------- synth

#[derive(Clone, Copy, Debug, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyArg {
    Ellipsoid,
    BumpyEllipsoid,
    LobedBlob,
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = FamilyArg::BumpyEllipsoid)]
    pub family: FamilyArg,
    /// JSON family spec; overrides --family and the lattice flags.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub subdivisions: u32,
    /// Same connectivity for every member.
    #[arg(long)]
    pub no_jitter: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let (spec, inputs) = match &a.spec {
        Some(p) => {
            require_file(p, "spec")?;
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            let spec: FamilySpec =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            (spec, vec![p.clone()])
        }
        None => {
            let family = match a.family {
                FamilyArg::Ellipsoid => FamilyKind::Ellipsoid,
                FamilyArg::BumpyEllipsoid => FamilyKind::BumpyEllipsoid,
                FamilyArg::LobedBlob => FamilyKind::LobedBlob,
            };
            let spec = FamilySpec {
                family,
                subdivisions: a.subdivisions,
                jitter: !a.no_jitter,
                seed: a.seed,
                ..FamilySpec::default()
            };
            (spec, vec![])
        }
    };
    spec.validate()?;
    let input_hash = hash_inputs(&inputs)?;
    let members = generate_family(&spec, a.n)?;
    let template = spec.template_mesh()?;
    let _lock = DirLock::acquire(&a.out_dir)?;
    write_family(&a.out_dir, &spec, &members)?;
    write_file(&a.out_dir.join("template.obj"), write_obj(&template).as_bytes())?;
    let mut outputs: Vec<String> = (0..members.len()).map(|i| format!("member_{i:03}.obj")).collect();
    outputs.extend(["manifest.json".into(), "template.obj".into()]);
    write_run_json(
        &a.out_dir,
        &RunRecord {
            command: "synth",
            software_version: VERSION,
            seed: spec.seed,
            input_hash,
            inputs: names(&inputs),
            outputs,
            config: &spec,
        },
    )
}
