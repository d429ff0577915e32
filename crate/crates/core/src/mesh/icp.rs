//! Point-to-point rigid ICP with SVD (Kabsch) updates.

use nalgebra::{Matrix3, Vector3};

use super::geom::{centroid, Vec3};
use super::kdtree::KdTree;
use super::{MeshError, TriMesh};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    pub rotation: [[f64; 3]; 3],
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    /// Rotation by `angle` radians about the unit `axis`, then translation.
    pub fn from_axis_angle(axis: Vec3, angle: f64, translation: Vec3) -> Self {
        let ax = nalgebra::Unit::new_normalize(Vector3::from(axis));
        let r = nalgebra::Rotation3::from_axis_angle(&ax, angle);
        Self::from_parts(*r.matrix(), Vector3::from(translation))
    }

    fn from_parts(r: Matrix3<f64>, t: Vector3<f64>) -> Self {
        let mut rotation = [[0.0; 3]; 3];
        for (i, row) in rotation.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = r[(i, j)];
            }
        }
        Self {
            rotation,
            translation: [t[0], t[1], t[2]],
        }
    }

    fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.rotation[i][j])
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        let r = &self.rotation;
        let t = self.translation;
        [
            r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + t[0],
            r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + t[1],
            r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + t[2],
        ]
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &RigidTransform) -> Self {
        let r = self.matrix() * first.matrix();
        let t = self.matrix() * Vector3::from(first.translation) + Vector3::from(self.translation);
        Self::from_parts(r, t)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.matrix().transpose();
        Self::from_parts(rt, -(rt * Vector3::from(self.translation)))
    }

    /// Rotation angle in radians.
    pub fn angle(&self) -> f64 {
        let r = &self.rotation;
        ((r[0][0] + r[1][1] + r[2][2] - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }

    pub fn determinant(&self) -> f64 {
        self.matrix().determinant()
    }
}

#[derive(Clone, Debug)]
pub struct IcpResult {
    pub transform: RigidTransform,
    pub aligned: TriMesh,
    pub iterations: usize,
    pub rms: f64,
    pub converged: bool,
    /// Set when `max_iters` ran out before the RMS change fell below `tol`.
    pub warning: Option<String>,
}

/// Best rotation and translation mapping `src[i]` onto `dst[i]`.
pub fn kabsch(src: &[Vec3], dst: &[Vec3]) -> RigidTransform {
    let cs = Vector3::from(centroid(src));
    let cd = Vector3::from(centroid(dst));
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (Vector3::from(*s) - cs) * (Vector3::from(*d) - cd).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut r = vt.transpose() * u.transpose();
    if r.determinant() < 0.0 {
        let mut fix = Matrix3::identity();
        fix[(2, 2)] = -1.0;
        r = vt.transpose() * fix * u.transpose();
    }
    let t = cd - r * cs;
    RigidTransform::from_parts(r, t)
}

fn rms_to(points: &[Vec3], tree: &KdTree) -> (f64, Vec<usize>) {
    let mut sum = 0.0;
    let mut idx = Vec::with_capacity(points.len());
    for &p in points {
        let (i, d2) = tree.nearest2(p).expect("target non-empty");
        sum += d2;
        idx.push(i);
    }
    ((sum / points.len() as f64).sqrt(), idx)
}

/// Rotations taking the principal frame of `src` onto that of `dst`, one per
/// proper sign choice, each followed by the centroid shift.
fn principal_axis_starts(src: &[Vec3], dst: &[Vec3]) -> Vec<RigidTransform> {
    let frame = |pts: &[Vec3]| -> Option<(Vector3<f64>, Matrix3<f64>)> {
        let c = Vector3::from(centroid(pts));
        let mut cov = Matrix3::zeros();
        for p in pts {
            let d = Vector3::from(*p) - c;
            cov += d * d.transpose();
        }
        let eig = cov.symmetric_eigen();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut e = Matrix3::from_columns(&order.map(|i| eig.eigenvectors.column(i).into_owned()));
        if e.determinant() < 0.0 {
            e.column_mut(2).neg_mut();
        }
        e.iter().all(|v| v.is_finite()).then_some((c, e))
    };
    let (Some((cs, es)), Some((cd, ed))) = (frame(src), frame(dst)) else {
        return Vec::new();
    };
    [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
        .iter()
        .map(|s| {
            let r = ed * Matrix3::from_diagonal(&Vector3::from(*s)) * es.transpose();
            RigidTransform::from_parts(r, cd - r * cs)
        })
        .collect()
}

struct IcpRun {
    transform: RigidTransform,
    current: Vec<Vec3>,
    iterations: usize,
    rms: f64,
    converged: bool,
}

fn icp_from(src: &[Vec3], target: &[Vec3], tree: &KdTree, init: RigidTransform, max_iters: usize, tol: f64) -> IcpRun {
    let mut transform = init;
    let mut current: Vec<Vec3> = src.iter().map(|&p| init.apply(p)).collect();
    let (mut rms, mut corr) = rms_to(&current, tree);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let matched: Vec<Vec3> = corr.iter().map(|&i| target[i]).collect();
        transform = kabsch(src, &matched);
        current = src.iter().map(|&p| transform.apply(p)).collect();
        let (new_rms, new_corr) = rms_to(&current, tree);
        let change = (rms - new_rms).abs();
        rms = new_rms;
        corr = new_corr;
        if change < tol {
            converged = true;
            break;
        }
    }
    IcpRun {
        transform,
        current,
        iterations,
        rms,
        converged,
    }
}

/// Rigidly aligns `source` to `target` with nearest-vertex correspondences.
///
/// Nearest-vertex ICP has a narrow basin, so besides the identity it also
/// starts from the principal-axis alignments and keeps the run with the
/// lowest final RMS (the identity wins ties).
pub fn icp_align(source: &TriMesh, target: &TriMesh, max_iters: usize, tol: f64) -> Result<IcpResult, MeshError> {
    let tree = KdTree::new(target.vertices());
    let src = source.vertices();
    let mut best = icp_from(src, target.vertices(), &tree, RigidTransform::identity(), max_iters, tol);
    if max_iters > 0 && best.rms > 0.0 {
        for init in principal_axis_starts(src, target.vertices()) {
            let run = icp_from(src, target.vertices(), &tree, init, max_iters, tol);
            if run.rms < best.rms {
                best = run;
            }
        }
    }
    let IcpRun {
        transform,
        current,
        iterations,
        rms,
        converged,
    } = best;
    let warning = (!converged).then(|| format!("ICP stopped after {iterations} iterations without converging"));
    Ok(IcpResult {
        transform,
        aligned: source.with_vertices(current)?,
        iterations,
        rms,
        converged,
        warning,
    })
}
