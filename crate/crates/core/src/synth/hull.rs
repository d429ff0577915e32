//! Incremental convex hull, used to triangulate point lattices on the sphere.

use std::collections::HashSet;

use crate::mesh::geom::{cross, dot, sub, Vec3};

fn orient(p: &[Vec3], f: [usize; 3], q: Vec3) -> f64 {
    let [a, b, c] = f.map(|i| p[i]);
    dot(cross(sub(b, a), sub(c, a)), sub(q, a))
}

/// Outward-oriented triangles of the convex hull of `points`. Points must
/// be in general position (at least four not coplanar).
pub fn convex_hull(points: &[Vec3]) -> Option<Vec<[usize; 3]>> {
    let n = points.len();
    if n < 4 {
        return None;
    }
    // initial tetrahedron: 0, farthest from 0, farthest from that line, farthest from that plane
    let far = |f: &dyn Fn(Vec3) -> f64| (0..n).max_by(|&i, &j| f(points[i]).total_cmp(&f(points[j]))).unwrap();
    let i0 = 0;
    let i1 = far(&|q| crate::mesh::geom::dist2(q, points[i0]));
    let dir = sub(points[i1], points[i0]);
    let i2 = far(&|q| crate::mesh::geom::norm(cross(dir, sub(q, points[i0]))));
    let i3 = far(&|q| orient(points, [i0, i1, i2], q).abs());
    if orient(points, [i0, i1, i2], points[i3]).abs() < 1e-12 {
        return None;
    }
    let mut faces: Vec<[usize; 3]> = if orient(points, [i0, i1, i2], points[i3]) < 0.0 {
        vec![[i0, i1, i2], [i0, i3, i1], [i1, i3, i2], [i2, i3, i0]]
    } else {
        vec![[i0, i2, i1], [i0, i1, i3], [i1, i2, i3], [i2, i0, i3]]
    };

    let scale = points.iter().map(|&q| crate::mesh::geom::norm(q)).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-12 * scale * scale * scale;
    for (pi, &q) in points.iter().enumerate() {
        if [i0, i1, i2, i3].contains(&pi) {
            continue;
        }
        let visible: Vec<bool> = faces.iter().map(|&f| orient(points, f, q) > tol).collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let vis_edges: HashSet<(usize, usize)> = faces
            .iter()
            .zip(&visible)
            .filter(|(_, &v)| v)
            .flat_map(|(f, _)| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])])
            .collect();
        let mut next: Vec<[usize; 3]> = faces
            .iter()
            .zip(&visible)
            .filter(|(_, &v)| !v)
            .map(|(f, _)| *f)
            .collect();
        for f in faces.iter().zip(&visible).filter(|(_, &v)| v).map(|(f, _)| f) {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                if !vis_edges.contains(&(b, a)) {
                    next.push([a, b, pi]);
                }
            }
        }
        faces = next;
    }
    Some(faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_corners_give_twelve_outward_faces() {
        let mut pts = Vec::new();
        for x in [-1.0, 1.0] {
            for y in [-1.0, 1.0] {
                for z in [-1.0, 1.0] {
                    pts.push([x + 1e-3 * y * z, y + 2e-3 * x, z]);
                }
            }
        }
        let faces = convex_hull(&pts).unwrap();
        assert_eq!(faces.len(), 12);
        for f in faces {
            let [a, b, c] = f.map(|i| pts[i]);
            let n = cross(sub(b, a), sub(c, a));
            let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0, (a[2] + b[2] + c[2]) / 3.0];
            assert!(dot(n, centroid) > 0.0);
        }
    }
}
