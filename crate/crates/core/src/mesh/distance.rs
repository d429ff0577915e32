//! Chamfer distances and exact point-to-surface distances.

use rayon::prelude::*;

use super::bvh::Bvh;
use super::geom::{add, dot, scale, sub, Vec3};
use super::kdtree::KdTree;
use super::sampling::sample_surface;
use super::{PointSet, TriMesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChamferMode {
    /// Half the mean nearest distance in each direction.
    Symmetric,
    /// Mean distance from each point of `a` to its nearest point of `b`.
    OneSidedAToB,
}

fn mean_nearest(from: &[Vec3], to: &KdTree) -> f64 {
    let sum: f64 = from
        .par_iter()
        .map(|&p| to.nearest(p).expect("non-empty").1)
        .collect::<Vec<_>>()
        .iter()
        .sum();
    sum / from.len() as f64
}

/// Chamfer distance with unsquared Euclidean distances.
pub fn chamfer_distance(a: &PointSet, b: &PointSet, mode: ChamferMode) -> f64 {
    let tb = KdTree::new(b.points());
    let ab = mean_nearest(a.points(), &tb);
    match mode {
        ChamferMode::OneSidedAToB => ab,
        ChamferMode::Symmetric => {
            let ta = KdTree::new(a.points());
            0.5 * ab + 0.5 * mean_nearest(b.points(), &ta)
        }
    }
}

/// Closest point on triangle `abc` to `p`, covering the face interior, the
/// three edges and the three vertices.
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return add(a, scale(ab, v));
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return add(a, scale(ac, w));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return add(b, scale(sub(c, b), w));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    add(a, add(scale(ab, v), scale(ac, w)))
}

pub fn point_triangle_distance(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let q = closest_point_on_triangle(p, a, b, c);
    dot(sub(p, q), sub(p, q)).sqrt()
}

/// Mean exact distance from `points` to the surface of `mesh`.
pub fn mean_point_to_surface(points: &[Vec3], mesh: &TriMesh) -> f64 {
    let bvh = Bvh::new(mesh);
    let d: Vec<f64> = points.par_iter().map(|&p| bvh.distance(p)).collect();
    d.iter().sum::<f64>() / points.len() as f64
}

/// Average symmetric surface distance from `n_samples` area-uniform samples
/// on each mesh, measured against the exact other surface.
pub fn average_symmetric_surface_distance(a: &TriMesh, b: &TriMesh, n_samples: usize, seed: u64) -> f64 {
    let pa = sample_surface(a, n_samples, seed);
    let pb = sample_surface(b, n_samples, seed.wrapping_add(1));
    0.5 * mean_point_to_surface(pa.points(), b) + 0.5 * mean_point_to_surface(pb.points(), a)
}
