mod common;

use flowssm::autodiff::{Tape, Tensor, Var};
use flowssm::flow::{
    integrate, integrate_flow, velocity, Direction, FlowConfig, FlowError, ImNetMlp, Integrator, LatentVelocity,
    MlpConfig, VelocityField,
};
use flowssm::mesh::{PointSet, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::small_mlp;

/// Plain-loop forward pass over the stored weights, independent of the tape.
fn scripted_forward(mlp: &ImNetMlp, input: &[f64]) -> Vec<f64> {
    let p = mlp.params();
    let slope = mlp.config().leaky_slope;
    let dense = |x: &[f64], w: &Tensor, b: &Tensor| -> Vec<f64> {
        (0..w.cols()).map(|j| b.data()[j] + (0..w.rows()).map(|i| x[i] * w.get(i, j)).sum::<f64>()).collect()
    };
    let act = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|x| if x > 0.0 { x } else { slope * x }).collect() };
    let mut h = act(dense(input, &p[0], &p[1]));
    for l in 1..4 {
        let mut cat = h.clone();
        cat.extend_from_slice(input);
        h = act(dense(&cat, &p[2 * l], &p[2 * l + 1]));
    }
    dense(&h, &p[8], &p[9])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn velocity_is_scaled_mlp_output(seed in 0u64..10_000, t in 0.0f64..=1.0, s in 0.1f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 5;
        let mlp = ImNetMlp::new(3 + d, small_mlp(12), seed);
        let x: Vec3 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let z: Vec<f64> = (0..d).map(|_| s * rng.random_range(-1.0..1.0)).collect();
        let v = velocity(&mlp, x, t, &z).unwrap();
        let mut input = x.to_vec();
        input.extend(z.iter().map(|zi| t * zi));
        let norm = z.iter().map(|a| a * a).sum::<f64>().sqrt();
        let f = scripted_forward(&mlp, &input);
        for k in 0..3 {
            prop_assert!((v[k] - f[k] * norm).abs() < 1e-12);
        }
        prop_assert_eq!(velocity(&mlp, x, t, &vec![0.0; d]).unwrap(), [0.0; 3]);
    }
}

#[test]
fn time_outside_unit_interval_is_rejected() {
    let mlp = ImNetMlp::new(5, small_mlp(4), 0);
    assert!(velocity(&mlp, [0.0; 3], 1.5, &[0.1, 0.2]).is_err());
}

struct Constant(Vec3);

impl VelocityField for Constant {
    fn eval(&self, tape: &mut Tape, x: Var, _t: f64) -> Result<Var, FlowError> {
        let rows = tape.value(x).rows();
        let c = tape.constant(Tensor::from_rows(&vec![self.0; rows]));
        Ok(c)
    }
}

struct Diagonal(f64);

impl VelocityField for Diagonal {
    fn eval(&self, tape: &mut Tape, x: Var, _t: f64) -> Result<Var, FlowError> {
        Ok(tape.scale(x, self.0)?)
    }
}

fn run(field: &dyn VelocityField, pts: &[Vec3], cfg: &FlowConfig) -> Tensor {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::from_rows(pts));
    let out = integrate(&mut tape, field, x, cfg, Direction::Forward).unwrap();
    tape.value(out).clone()
}

#[test]
fn constant_field_translates_for_both_integrators() {
    let pts = [[0.1, -0.2, 0.3], [1.0, 0.5, -0.5]];
    let c = [0.25, -0.5, 0.125];
    for integrator in [Integrator::Euler, Integrator::Rk4] {
        let out = run(&Constant(c), &pts, &FlowConfig { n_steps: 8, integrator });
        for (i, p) in pts.iter().enumerate() {
            for k in 0..3 {
                assert!((out.get(i, k) - (p[k] + c[k])).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn exponential_growth_doubles_in_unit_time() {
    let pts = [[1.0, -2.0, 0.5]];
    let out = run(&Diagonal(std::f64::consts::LN_2), &pts, &FlowConfig::default());
    for k in 0..3 {
        assert!((out.get(0, k) - 2.0 * pts[0][k]).abs() < 1e-4);
    }
}

#[test]
fn zero_latent_flow_returns_input_exactly() {
    let mlp = ImNetMlp::new(7, small_mlp(16), 3);
    let x0 = PointSet::external(vec![[0.3, 0.2, -0.9], [1.0, 1.0, 1.0]]).unwrap();
    for dir in [Direction::Forward, Direction::Reverse] {
        let out = integrate_flow(&mlp, &x0, |_| vec![0.0; 4], &FlowConfig::default(), dir).unwrap();
        assert_eq!(out.points(), x0.points());
    }
}

#[test]
fn divergent_trajectories_are_reported() {
    let out = {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[[1.0, 1.0, 1.0]]));
        integrate(&mut tape, &Diagonal(20.0), x, &FlowConfig::default(), Direction::Forward)
    };
    assert!(matches!(out, Err(FlowError::Diverged(_))));
}

/// Gradient of Σ Φ(x, 1) with respect to the latent, Euler with `n` steps.
fn euler_latent_gradient(mlp: &ImNetMlp, pts: &[Vec3], z: &[f64], n: usize) -> Vec<f64> {
    let mut tape = Tape::new();
    let bound = mlp.bind(&mut tape, false);
    let zv = tape.leaf(Tensor::matrix(pts.len(), z.len(), pts.iter().flat_map(|_| z.to_vec()).collect()).unwrap());
    let x = tape.constant(Tensor::from_rows(pts));
    let field = LatentVelocity::new(&mut tape, &bound, zv).unwrap();
    let cfg = FlowConfig {
        n_steps: n,
        integrator: Integrator::Euler,
    };
    let out = integrate(&mut tape, &field, x, &cfg, Direction::Forward).unwrap();
    let s = tape.sum(out).unwrap();
    tape.backward(s).unwrap().wrt(&tape, zv).into_data()
}

#[test]
fn euler_gradients_converge_with_step_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let d = 3;
    let mlp = ImNetMlp::new(3 + d, MlpConfig { output_init_scale: 0.5, ..small_mlp(16) }, 11);
    let pts: Vec<Vec3> = (0..3).map(|_| [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), 0.0]).collect();
    let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let reference = euler_latent_gradient(&mlp, &pts, &z, 256);
    let gap = |n: usize| -> f64 {
        euler_latent_gradient(&mlp, &pts, &z, n).iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let gaps: Vec<f64> = [1, 8, 64].iter().map(|&n| gap(n)).collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}
