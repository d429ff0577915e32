mod common;

use std::sync::OnceLock;

use flowssm::autodiff::Tensor;
use flowssm::eval::{evaluate_specificity, EvalConfig, LatentSampling};
use flowssm::latent::LatentState;
use flowssm::mesh::{average_symmetric_surface_distance, chamfer_distance, sample_surface, ChamferMode, TriMesh};
use flowssm::ssm::{fit_latent, fit_pca, init_model, sample_shape, train, FitConfig, FlowSsmModel, LossMode, TrainOutput};
use flowssm::synth::{family_nearest_neighbor_spread, FamilySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use common::{desk_fit, desk_training, meshes};

const DENSE: usize = 50_000;

fn surface_chamfer(a: &TriMesh, b: &TriMesh, seed: u64) -> f64 {
    chamfer_distance(&sample_surface(a, DENSE, seed), &sample_surface(b, DENSE, seed + 1), ChamferMode::Symmetric)
}

#[test]
fn pca_of_collinear_points() {
    let fit = fit_pca(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![4.0, 0.0]]).unwrap();
    let b = &fit.basis;
    assert_eq!(b.modes(), 1);
    assert!((b.mean[0] - 2.0).abs() < 1e-12 && b.mean[1].abs() < 1e-12);
    assert!((b.components.get(0, 0).abs() - 1.0).abs() < 1e-12 && b.components.get(0, 1).abs() < 1e-12);
    assert!((b.stddevs[0] - 2.0).abs() < 1e-12);
}

#[test]
fn identical_rows_have_no_modes() {
    let fit = fit_pca(&vec![vec![1.0, -2.0, 3.0]; 5]).unwrap();
    assert!(fit.degenerate);
    assert_eq!(fit.basis.modes(), 0);
}

#[test]
fn full_rank_pca_reconstructs_every_row() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rows: Vec<Vec<f64>> = (0..10).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let b = fit_pca(&rows).unwrap().basis;
    assert!(b.modes() <= 9);
    assert!(b.orthonormality_error() < 1e-12);
    assert!(b.stddevs.windows(2).all(|w| w[0] >= w[1]));
    for r in &rows {
        let back = b.reconstruct(&b.project(r));
        assert!(back.iter().zip(r).all(|(a, b)| (a - b).abs() < 1e-9));
        assert!(b.span_residual(r) < 1e-9);
    }
}

#[test]
fn pca_rank_is_bounded_by_sample_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..12).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let b = fit_pca(&rows).unwrap().basis;
    assert!(b.modes() <= 3);
    // A point off the 3-dimensional affine span has a positive residual.
    let off: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
    assert!(b.span_residual(&off) > 1e-3);
}

struct Shared {
    train: Vec<TriMesh>,
    held_out: Vec<TriMesh>,
    out: TrainOutput,
}

/// Ellipsoid family, d=16, M=27, 100 epochs at desk resolution.
fn ellipsoids() -> &'static Shared {
    static S: OnceLock<Shared> = OnceLock::new();
    S.get_or_init(|| {
        let spec = FamilySpec::ellipsoid();
        let mut all = meshes(&spec, 23);
        let held_out = all.split_off(20);
        let out = train(&all, &spec.template_mesh().unwrap(), &desk_training(16, 27, 100, 2)).unwrap();
        Shared { train: all, held_out, out }
    })
}

fn fit_cfg(mode: LossMode, seed: u64) -> FitConfig {
    FitConfig {
        iters: 100,
        loss_mode: mode,
        ..desk_fit(seed)
    }
}

#[test]
fn training_cuts_reconstruction_error_below_a_quarter() {
    let s = ellipsoids();
    let cfg = &s.out.model.config;
    let fresh = init_model(&s.out.model.template, cfg).unwrap();
    let normal = Normal::new(0.0, cfg.latent_init_std).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut initial = 0.0;
    let mut fin = 0.0;
    for (i, (shape, lat)) in s.train.iter().zip(&s.out.model.training_latents).enumerate() {
        let random = LatentState {
            z_global: (0..cfg.d).map(|_| normal.sample(&mut rng)).collect(),
            z_local: Tensor::matrix(fresh.m(), cfg.d, (0..fresh.m() * cfg.d).map(|_| normal.sample(&mut rng)).collect())
                .unwrap(),
        };
        initial += surface_chamfer(&fresh.deform_template(&random, true).unwrap(), shape, 10 * i as u64);
        fin += surface_chamfer(&s.out.model.deform_template(lat, true).unwrap(), shape, 10 * i as u64);
    }
    assert!(fin < 0.25 * initial, "final {fin} initial {initial}");
}

#[test]
fn second_stage_starts_where_the_first_ended() {
    let h = &ellipsoids().out.history;
    assert!(h.stage2_initial_loss <= 1.1 * h.stage1_final_loss, "{h:?}");
    assert!(h.final_loss.is_finite());
}

#[test]
fn decoded_shapes_keep_template_connectivity() {
    let m = &ellipsoids().out.model;
    let (g, l) = (m.pca_global().unwrap(), m.pca_local().unwrap());
    let zero = m.decode(&vec![0.0; g.modes()], &vec![0.0; l.modes()]).unwrap();
    assert_eq!(zero.z_global, g.mean);
    assert_eq!(zero.z_local.data(), &l.mean[..]);
    assert_eq!(m.deform_template(&zero, true).unwrap().faces(), m.template.faces());
    let (sample, _) = sample_shape(m, 3).unwrap();
    assert_eq!(sample.faces(), m.template.faces());
}

#[test]
fn fitting_never_returns_worse_than_its_start_and_generalizes() {
    let s = ellipsoids();
    let m = &s.out.model;
    let fit_err = |shape: &TriMesh, seed: u64| -> f64 {
        let target = sample_surface(shape, 2000, 100 + seed);
        let fit = fit_latent(m, &target, &fit_cfg(LossMode::Symmetric, seed)).unwrap();
        assert!(fit.global_loss <= fit.loss_history[0]);
        assert!(fit.latent.is_finite());
        surface_chamfer(&fit.mesh, shape, 200 + seed)
    };
    let train_err: f64 = s.train[..3].iter().enumerate().map(|(i, t)| fit_err(t, i as u64)).sum::<f64>() / 3.0;
    for (i, shape) in s.held_out.iter().enumerate() {
        let e = fit_err(shape, 10 + i as u64);
        assert!(e < 1.5 * train_err, "held-out {e} vs training {train_err}");
    }
}

#[test]
fn sparse_one_sided_fit_recovers_the_full_shape() {
    let s = ellipsoids();
    let m: &FlowSsmModel = &s.out.model;
    let truth = &s.train[0];
    let dense = fit_latent(m, &sample_surface(truth, 2000, 1), &fit_cfg(LossMode::Symmetric, 1)).unwrap();
    let sparse = fit_latent(m, &sample_surface(truth, 200, 2), &fit_cfg(LossMode::OneSidedTargetToDeformed, 1)).unwrap();
    let d = average_symmetric_surface_distance(&dense.mesh, truth, 4000, 3);
    let sp = average_symmetric_surface_distance(&sparse.mesh, truth, 4000, 3);
    assert!(sp < 3.0 * d, "sparse {sp} dense {d}");
}

#[test]
fn pca_samples_stay_within_the_family_spread() {
    let s = ellipsoids();
    let cfg = EvalConfig {
        n_specificity_samples: 100,
        specificity_points: 2000,
        ..EvalConfig::default()
    };
    let spread = family_nearest_neighbor_spread(&s.train, cfg.specificity_points, 8).unwrap();
    let pca = evaluate_specificity(&s.out.model, &s.train, &cfg, LatentSampling::Pca).unwrap();
    assert!(pca.summary.mean < 2.0 * spread, "{} vs spread {}", pca.summary.mean, spread);
}

#[test]
fn two_identical_shapes_are_approached_from_the_template() {
    let spec = FamilySpec {
        subdivisions: 2,
        ..FamilySpec::bumpy_ellipsoid()
    };
    let shape = meshes(&spec, 1).remove(0);
    let template = spec.template_mesh().unwrap();
    let cfg = flowssm::ssm::TrainingConfig {
        epochs: 40,
        batch_size: 2,
        d: 4,
        m_control_points: 8,
        mlp: common::small_mlp(16),
        n_sample_points: 256,
        lr: 3e-3,
        seed: 5,
        ..Default::default()
    };
    let out = train(&[shape.clone(), shape.clone()], &template, &cfg).unwrap();
    let before = surface_chamfer(&template, &shape, 1);
    for lat in &out.model.training_latents {
        let after = surface_chamfer(&out.model.deform_template(lat, true).unwrap(), &shape, 1);
        assert!(after < before, "{after} vs {before}");
    }
}

fn eval_cfg() -> EvalConfig {
    EvalConfig {
        fit: fit_cfg(LossMode::Symmetric, 0),
        target_points: 2000,
        assd_samples: 4000,
        ..EvalConfig::default()
    }
}

#[test]
fn refitting_training_shapes_reaches_training_quality() {
    let s = ellipsoids();
    let m = &s.out.model;
    let shapes = &s.train[..3];
    let refit = flowssm::eval::evaluate_generality(m, shapes, &eval_cfg()).unwrap();
    let trained: f64 = shapes
        .iter()
        .zip(&m.training_latents)
        .enumerate()
        .map(|(i, (shape, lat))| {
            average_symmetric_surface_distance(&m.deform_template(lat, true).unwrap(), shape, 4000, i as u64)
        })
        .sum::<f64>()
        / 3.0;
    assert!(refit.summary.mean <= 1.1 * trained, "refit {} vs trained {trained}", refit.summary.mean);
}

#[test]
fn local_stage_adds_little_on_a_pure_scaling_family() {
    let s = ellipsoids();
    let ab = flowssm::eval::ablation_from_model(&s.out.model, &s.held_out, &eval_cfg()).unwrap();
    let (g, gl) = (ab.global_only.summary.mean, ab.global_local.summary.mean);
    assert!((g - gl).abs() <= 0.2 * g.max(gl), "global {g} vs global+local {gl}");
}
