use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, TensorError, Var};
use crate::mesh::geom::dist2;
use crate::mesh::{farthest_point_sample, TriMesh, Vec3};

use super::LatentError;

/// Tuning range accepted for the initial inverse kernel width.
pub const EPS_RANGE: (f64, f64) = (0.01, 30.0);

/// Gaussian RBF centers on the template with per-center inverse widths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlPointSet {
    pub positions: Vec<Vec3>,
    pub inv_widths: Vec<f64>,
}

impl ControlPointSet {
    pub fn new(positions: Vec<Vec3>, inv_widths: Vec<f64>) -> Result<Self, LatentError> {
        if positions.is_empty() {
            return Err(LatentError::Invalid("at least one control point is required".into()));
        }
        if positions.len() != inv_widths.len() {
            return Err(LatentError::Invalid(format!(
                "{} positions but {} inverse widths",
                positions.len(),
                inv_widths.len()
            )));
        }
        if let Some(e) = inv_widths.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(LatentError::Invalid(format!("inverse width {e} is not positive")));
        }
        Ok(Self { positions, inv_widths })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions_tensor(&self) -> Tensor {
        Tensor::from_rows(&self.positions)
    }

    pub fn widths_tensor(&self) -> Tensor {
        Tensor::matrix(1, self.inv_widths.len(), self.inv_widths.clone()).expect("1×M")
    }

    /// `exp(-(ε_k · r)²)` for control point `k` at distance `r`.
    pub fn kernel(&self, k: usize, r: f64) -> f64 {
        let a = self.inv_widths[k] * r;
        (-a * a).exp()
    }
}

/// `m` farthest-point-sampled surface points, all with width `initial_eps`.
pub fn place_control_points(template: &TriMesh, m: usize, initial_eps: f64, seed: u64) -> Result<ControlPointSet, LatentError> {
    if m == 0 {
        return Err(LatentError::Invalid("M must be at least 1".into()));
    }
    if !(EPS_RANGE.0..=EPS_RANGE.1).contains(&initial_eps) {
        return Err(LatentError::Invalid(format!(
            "initial inverse width {initial_eps} outside [{}, {}]",
            EPS_RANGE.0, EPS_RANGE.1
        )));
    }
    let pts = farthest_point_sample(template, m, seed).into_points();
    ControlPointSet::new(pts, vec![initial_eps; m])
}

/// Unnormalized Gaussian RBF sum `Σ_k z_k · exp(-(ε_k ‖c_k − x‖)²)`.
/// `z_local` is M × d.
pub fn interpolate_latent(cps: &ControlPointSet, z_local: &Tensor, x: Vec3) -> Vec<f64> {
    let d = z_local.cols();
    debug_assert_eq!(z_local.rows(), cps.len());
    let mut out = vec![0.0; d];
    for (k, &c) in cps.positions.iter().enumerate() {
        let w = cps.kernel(k, dist2(c, x).sqrt());
        for (o, z) in out.iter_mut().zip(z_local.row(k)) {
            *o += w * z;
        }
    }
    out
}

/// Tape version of [`interpolate_latent`] for rows of `x` (P×3): returns P×d.
/// `centers` is M×3, `inv_widths` 1×M and `z_local` M×d.
pub fn rbf_latents(tape: &mut Tape, x: Var, centers: Var, inv_widths: Var, z_local: Var) -> Result<Var, TensorError> {
    let r2 = tape.sq_dist(x, centers)?;
    let e2 = tape.mul(inv_widths, inv_widths)?;
    let a = tape.mul_row(r2, e2)?;
    let neg = tape.scale(a, -1.0)?;
    let w = tape.exp(neg)?;
    tape.matmul(w, z_local)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_hand_value() {
        let cps = ControlPointSet::new(vec![[0.0; 3], [1.0, 0.0, 0.0]], vec![1.0, 1.0]).unwrap();
        let z = Tensor::matrix(2, 1, vec![1.0, 2.0]).unwrap();
        let v = interpolate_latent(&cps, &z, [0.0; 3]);
        assert!((v[0] - (1.0 + 2.0 * (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn eps_outside_range_is_rejected() {
        let m = TriMesh::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        assert!(place_control_points(&m, 1, 50.0, 0).is_err());
        assert!(place_control_points(&m, 0, 1.0, 0).is_err());
        let one = place_control_points(&m, 1, 2.5, 0).unwrap();
        assert_eq!(one.inv_widths, vec![2.5]);
    }

    #[test]
    fn tape_rbf_matches_plain() {
        let cps = ControlPointSet::new(
            vec![[0.1, 0.2, 0.3], [-0.5, 0.0, 0.4], [0.3, -0.7, 0.1]],
            vec![1.5, 0.7, 2.0],
        )
        .unwrap();
        let z = Tensor::matrix(3, 2, vec![0.3, -1.0, 2.0, 0.5, -0.2, 0.9]).unwrap();
        let xs = [[0.0, 0.0, 0.0], [0.4, -0.3, 0.2]];
        let mut t = Tape::new();
        let xv = t.constant(Tensor::from_rows(&xs));
        let c = t.constant(cps.positions_tensor());
        let e = t.constant(cps.widths_tensor());
        let zv = t.constant(z.clone());
        let out = rbf_latents(&mut t, xv, c, e, zv).unwrap();
        for (i, x) in xs.iter().enumerate() {
            let plain = interpolate_latent(&cps, &z, *x);
            for j in 0..2 {
                assert!((t.value(out).get(i, j) - plain[j]).abs() < 1e-14);
            }
        }
    }
}
