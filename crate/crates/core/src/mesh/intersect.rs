//! Triangle–triangle intersection and mesh self-intersection counting.

use rayon::prelude::*;

use super::bvh::Bvh;
use super::geom::{cross, dot, sub, Vec3};
use super::TriMesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SelfIntersection {
    pub is_self_intersecting: bool,
    pub intersecting_face_pairs: usize,
}

#[inline]
fn orient3d(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> f64 {
    dot(cross(sub(b, a), sub(c, a)), sub(d, a))
}

#[inline]
fn orient2d(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment_2d(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect_2d(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient2d(q1, q2, p1);
    let d2 = orient2d(q1, q2, p2);
    let d3 = orient2d(p1, p2, q1);
    let d4 = orient2d(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment_2d(q1, q2, p1))
        || (d2 == 0.0 && on_segment_2d(q1, q2, p2))
        || (d3 == 0.0 && on_segment_2d(p1, p2, q1))
        || (d4 == 0.0 && on_segment_2d(p1, p2, q2))
}

fn point_in_triangle_2d(p: [f64; 2], t: [[f64; 2]; 3]) -> bool {
    let a = orient2d(t[0], t[1], p);
    let b = orient2d(t[1], t[2], p);
    let c = orient2d(t[2], t[0], p);
    (a >= 0.0 && b >= 0.0 && c >= 0.0) || (a <= 0.0 && b <= 0.0 && c <= 0.0)
}

fn project(p: Vec3, drop_axis: usize) -> [f64; 2] {
    match drop_axis {
        0 => [p[1], p[2]],
        1 => [p[0], p[2]],
        _ => [p[0], p[1]],
    }
}

fn dominant_axis(n: Vec3) -> usize {
    let a = [n[0].abs(), n[1].abs(), n[2].abs()];
    if a[0] >= a[1] && a[0] >= a[2] {
        0
    } else if a[1] >= a[2] {
        1
    } else {
        2
    }
}

fn coplanar_overlap(t1: [Vec3; 3], t2: [Vec3; 3], normal: Vec3) -> bool {
    let ax = dominant_axis(normal);
    let a = t1.map(|p| project(p, ax));
    let b = t2.map(|p| project(p, ax));
    for i in 0..3 {
        for j in 0..3 {
            if segments_intersect_2d(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3]) {
                return true;
            }
        }
    }
    point_in_triangle_2d(a[0], b) || point_in_triangle_2d(b[0], a)
}

/// Closed segment `pq` against closed triangle `t`.
fn segment_hits_triangle(p: Vec3, q: Vec3, t: [Vec3; 3]) -> bool {
    let sp = orient3d(t[0], t[1], t[2], p);
    let sq = orient3d(t[0], t[1], t[2], q);
    if (sp > 0.0 && sq > 0.0) || (sp < 0.0 && sq < 0.0) {
        return false;
    }
    if sp == 0.0 && sq == 0.0 {
        let n = cross(sub(t[1], t[0]), sub(t[2], t[0]));
        let ax = dominant_axis(n);
        let tt = t.map(|v| project(v, ax));
        let (p2, q2) = (project(p, ax), project(q, ax));
        return point_in_triangle_2d(p2, tt)
            || (0..3).any(|i| segments_intersect_2d(p2, q2, tt[i], tt[(i + 1) % 3]));
    }
    // The supporting line crosses the triangle iff the three triple
    // products share a sign.
    let s1 = orient3d(p, q, t[0], t[1]);
    let s2 = orient3d(p, q, t[1], t[2]);
    let s3 = orient3d(p, q, t[2], t[0]);
    (s1 >= 0.0 && s2 >= 0.0 && s3 >= 0.0) || (s1 <= 0.0 && s2 <= 0.0 && s3 <= 0.0)
}

/// Whether two closed triangles share at least one point.
pub fn triangles_intersect(t1: [Vec3; 3], t2: [Vec3; 3]) -> bool {
    let d2 = t2.map(|p| orient3d(t1[0], t1[1], t1[2], p));
    if d2.iter().all(|&d| d > 0.0) || d2.iter().all(|&d| d < 0.0) {
        return false;
    }
    let d1 = t1.map(|p| orient3d(t2[0], t2[1], t2[2], p));
    if d1.iter().all(|&d| d > 0.0) || d1.iter().all(|&d| d < 0.0) {
        return false;
    }
    if d2.iter().all(|&d| d == 0.0) {
        return coplanar_overlap(t1, t2, cross(sub(t1[1], t1[0]), sub(t1[2], t1[0])));
    }
    (0..3).any(|i| segment_hits_triangle(t1[i], t1[(i + 1) % 3], t2))
        || (0..3).any(|i| segment_hits_triangle(t2[i], t2[(i + 1) % 3], t1))
}

fn share_vertex(a: [usize; 3], b: [usize; 3]) -> bool {
    a.iter().any(|i| b.contains(i))
}

fn pair_intersects(mesh: &TriMesh, i: usize, j: usize) -> bool {
    let (fi, fj) = (mesh.faces()[i], mesh.faces()[j]);
    !share_vertex(fi, fj) && triangles_intersect(mesh.triangle(i), mesh.triangle(j))
}

/// Counts intersecting pairs of faces that share no vertex, using a BVH to
/// prune candidate pairs.
pub fn count_self_intersections(mesh: &TriMesh) -> SelfIntersection {
    let bvh = Bvh::new(mesh);
    let pairs = bvh.overlapping_pairs();
    let hits = pairs.par_iter().filter(|&&(i, j)| pair_intersects(mesh, i, j)).count();
    SelfIntersection {
        is_self_intersecting: hits > 0,
        intersecting_face_pairs: hits,
    }
}

/// All-pairs reference implementation of [`count_self_intersections`].
pub fn count_self_intersections_exhaustive(mesh: &TriMesh) -> SelfIntersection {
    let n = mesh.face_count();
    let hits = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).filter(|&j| pair_intersects(mesh, i, j)).count())
        .sum();
    SelfIntersection {
        is_self_intersecting: hits > 0,
        intersecting_face_pairs: hits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: [Vec3; 3] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];

    #[test]
    fn piercing_triangle_intersects() {
        let t2 = [[0.2, 0.2, -1.0], [0.2, 0.2, 1.0], [0.3, 0.8, 0.5]];
        assert!(triangles_intersect(T, t2));
        assert!(triangles_intersect(t2, T));
    }

    #[test]
    fn separated_triangles_do_not() {
        let t2 = [[0.0, 0.0, 0.1], [1.0, 0.0, 0.1], [0.0, 1.0, 0.1]];
        assert!(!triangles_intersect(T, t2));
        let t3 = [[2.0, 2.0, -1.0], [2.0, 2.0, 1.0], [3.0, 2.0, 0.0]];
        assert!(!triangles_intersect(T, t3));
    }

    #[test]
    fn coplanar_cases() {
        let overlapping = [[0.2, 0.2, 0.0], [2.0, 0.2, 0.0], [0.2, 2.0, 0.0]];
        assert!(triangles_intersect(T, overlapping));
        let contained = [[0.1, 0.1, 0.0], [0.3, 0.1, 0.0], [0.1, 0.3, 0.0]];
        assert!(triangles_intersect(T, contained));
        let apart = [[2.0, 2.0, 0.0], [3.0, 2.0, 0.0], [2.0, 3.0, 0.0]];
        assert!(!triangles_intersect(T, apart));
    }

    #[test]
    fn touching_edge_counts() {
        // vertex of t2 lies in the interior of T
        let t2 = [[0.25, 0.25, 0.0], [0.25, 0.25, 1.0], [1.0, 1.0, 1.0]];
        assert!(triangles_intersect(T, t2));
    }
}
