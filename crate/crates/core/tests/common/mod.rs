#![allow(dead_code)]

use flowssm::autodiff::{Tape, Tensor, Var};
use flowssm::flow::{relative_error, FlowConfig, MlpConfig};
use flowssm::mesh::TriMesh;
use flowssm::ssm::{FitConfig, TrainingConfig};
use flowssm::synth::{generate_family, FamilySpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_FLOOR: f64 = 1e-6;

pub fn random_tensor(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

/// Values bounded away from zero, for ops with a kink or singularity there.
pub fn away_from_zero(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| {
            let m = rng.random_range(0.2..1.5);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

/// Central-difference check of `build` on the scalar loss `Σ out ⊙ W` with a
/// random `W`, probing `probes` random input entries. Returns the worst
/// relative error.
pub fn fd_check(
    inputs: &[Tensor],
    build: &dyn Fn(&mut Tape, &[Var]) -> Var,
    probes: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let out_shape = {
        let mut t = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|x| t.leaf(x.clone())).collect();
        let o = build(&mut t, &vars);
        t.value(o).shape().to_vec()
    };
    let n: usize = out_shape.iter().product();
    let w = Tensor::new(out_shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let eval = |inputs: &[Tensor]| -> (Tape, Var, Vec<Var>) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = build(&mut tape, &vars);
        let wv = tape.constant(w.clone());
        let prod = tape.mul(out, wv).unwrap();
        let loss = tape.sum(prod).unwrap();
        (tape, loss, vars)
    };
    let (tape, loss, vars) = eval(inputs);
    let grads = tape.backward(loss).unwrap();
    let analytic: Vec<Tensor> = vars.iter().map(|&v| grads.wrt(&tape, v)).collect();

    let mut worst = 0.0f64;
    for _ in 0..probes {
        let i = rng.random_range(0..inputs.len());
        let j = rng.random_range(0..inputs[i].len());
        let mut plus = inputs.to_vec();
        plus[i].data_mut()[j] += FD_STEP;
        let mut minus = inputs.to_vec();
        minus[i].data_mut()[j] -= FD_STEP;
        let (tp, lp, _) = eval(&plus);
        let (tm, lm, _) = eval(&minus);
        let fd = (tp.value(lp).item() - tm.value(lm).item()) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(analytic[i].data()[j], fd, FD_FLOOR));
    }
    worst
}

pub fn small_mlp(width: usize) -> MlpConfig {
    MlpConfig {
        hidden: [width; 4],
        ..MlpConfig::default()
    }
}

/// Desk-scale training settings used by the synthetic benchmarks.
pub fn desk_training(d: usize, m: usize, epochs: usize, seed: u64) -> TrainingConfig {
    TrainingConfig {
        epochs,
        batch_size: 4,
        n_sample_points: 256,
        d,
        m_control_points: m,
        mlp: small_mlp(32),
        flow: FlowConfig::default(),
        seed,
        ..TrainingConfig::default()
    }
}

pub fn desk_fit(seed: u64) -> FitConfig {
    FitConfig {
        iters: 150,
        n_sample_points: 256,
        seed,
        ..FitConfig::default()
    }
}

pub fn meshes(spec: &FamilySpec, n: usize) -> Vec<TriMesh> {
    generate_family(spec, n).unwrap().into_iter().map(|m| m.mesh).collect()
}

/// Prints one acceptance line and returns `pass`.
pub fn report(id: u32, name: &str, pass: bool, detail: &str) -> bool {
    println!("criterion {id:>2} [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}
