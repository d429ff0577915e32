//! Trains a small model on a synthetic family and reports timings and
//! reconstruction errors. Settings come from environment variables.

use std::time::Instant;

use flowssm::flow::MlpConfig;
use flowssm::mesh::{average_symmetric_surface_distance, sample_surface};
use flowssm::ssm::{fit_latent, train, FitConfig, TrainingConfig};
use flowssm::synth::{generate_family, member_mesh, FamilySpec};

fn env<T: std::str::FromStr>(name: &str, default: T) -> T {
    std::env::var(name).ok().and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() {
    env_logger::init();
    let family: String = env("FAMILY", "bumpy".to_string());
    let n: usize = env("N_TRAIN", 40);
    let n_test: usize = env("N_TEST", 3);
    let spec = match family.as_str() {
        "lobed" => FamilySpec::lobed_blob(),
        "ellipsoid" => FamilySpec::ellipsoid(),
        _ => FamilySpec::bumpy_ellipsoid(),
    };
    let fam = generate_family(&spec, n + n_test).unwrap();
    let meshes: Vec<_> = fam.into_iter().map(|m| m.mesh).collect();
    let (train_set, test_set) = meshes.split_at(n);
    let mut tparams = vec![0.725, 0.625, 0.525];
    tparams.resize(spec.sample_params(&mut rand::rng()).len(), 0.0);
    let template = member_mesh(&FamilySpec { jitter: false, ..spec.clone() }, &tparams, 0).unwrap();
    let base: f64 = train_set.iter().map(|m| average_symmetric_surface_distance(&template, m, 4000, 1)).sum::<f64>()
        / n as f64;
    println!("template→train ASSD {base:.4}");

    let w: usize = env("WIDTH", 32);
    let cfg = TrainingConfig {
        epochs: env("EPOCHS", 10),
        batch_size: env("BATCH", 4),
        lr: env("LR", 1e-3),
        latent_lr: std::env::var("LATENT_LR").ok().and_then(|s| s.parse().ok()),
        n_sample_points: env("POINTS", 256),
        d: env("D", 16),
        m_control_points: env("M", 125),
        initial_eps: env("EPS", 2.5963),
        local_output_init_scale: env("LOCAL_SCALE", 0.1),
        flow: flowssm::flow::FlowConfig { n_steps: env("STEPS", 8), ..Default::default() },
        mlp: MlpConfig { hidden: [w, w, w, w], ..Default::default() },
        ..Default::default()
    };
    let t = Instant::now();
    let out = train(train_set, &template, &cfg).unwrap();
    println!("trained in {:.2?}", t.elapsed());
    let h = &out.history;
    println!(
        "loss initial {:.4} s1 {:.4} s2init {:.4} final {:.4}",
        h.initial_loss, h.stage1_final_loss, h.stage2_initial_loss, h.final_loss
    );
    let model = &out.model;
    for use_local in [false, true] {
        let e: f64 = train_set
            .iter()
            .zip(&model.training_latents)
            .take(10)
            .map(|(m, l)| average_symmetric_surface_distance(&model.deform_template(l, use_local).unwrap(), m, 4000, 1))
            .sum::<f64>()
            / 10f64.min(n as f64);
        println!("train recon ASSD (local={use_local}) {e:.4}");
    }
    let fit_cfg = FitConfig {
        iters: env("FIT_ITERS", 150),
        n_sample_points: cfg.n_sample_points,
        ..Default::default()
    };
    let t = Instant::now();
    let mut g = 0.0;
    for (i, m) in test_set.iter().enumerate() {
        let target = sample_surface(m, env("TARGET_POINTS", 2000), 7 + i as u64);
        let fit = fit_latent(model, &target, &fit_cfg).unwrap();
        let a = average_symmetric_surface_distance(&fit.mesh, m, 4000, 1);
        let gm = model.deform_template(&flowssm::latent::LatentState { z_local: model.decode(&fit.global_weights, &vec![0.0; model.pca_local().unwrap().modes()]).unwrap().z_local, ..fit.latent.clone() }, false).unwrap();
        let ag = average_symmetric_surface_distance(&gm, m, 4000, 1);
        println!("test {i}: ASSD {a:.4} (global only {ag:.4})");
        g += a;
    }
    println!("generality {:.4}, fits took {:.2?}", g / n_test as f64, t.elapsed());
}
