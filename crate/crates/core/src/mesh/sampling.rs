use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::geom::{add, scale, sub, Vec3};
use super::{PointSet, PointSource, TriMesh};

/// Area-weighted triangle picker with uniform barycentric sampling inside
/// the chosen face.
#[derive(Clone, Debug)]
pub struct SurfaceSampler<'a> {
    mesh: &'a TriMesh,
    cumulative: Vec<f64>,
}

impl<'a> SurfaceSampler<'a> {
    pub fn new(mesh: &'a TriMesh) -> Self {
        let mut acc = 0.0;
        let cumulative = (0..mesh.face_count())
            .map(|f| {
                acc += mesh.face_area(f);
                acc
            })
            .collect();
        Self { mesh, cumulative }
    }

    pub fn sample_face(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("mesh has faces");
        let r = rng.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= r)
            .min(self.cumulative.len() - 1)
    }

    pub fn sample_point(&self, rng: &mut impl Rng) -> (usize, Vec3) {
        let f = self.sample_face(rng);
        let [a, b, c] = self.mesh.triangle(f);
        let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        (f, add(a, add(scale(sub(b, a), u), scale(sub(c, a), v))))
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<Vec3> {
        (0..n).map(|_| self.sample_point(rng).1).collect()
    }
}

/// `n` area-uniform surface points, deterministic in `seed`.
///
/// # Panics
/// If `n == 0`.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_surface_with(mesh, n, &mut rng)
}

pub fn sample_surface_with(mesh: &TriMesh, n: usize, rng: &mut impl Rng) -> PointSet {
    assert!(n >= 1, "sample count must be positive");
    let pts = SurfaceSampler::new(mesh).sample(n, rng);
    PointSet::new(pts, PointSource::MeshSampled).expect("samples of a valid mesh are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::geom::{cross, dot};

    #[test]
    fn single_triangle_samples_lie_inside() {
        let m = TriMesh::new(
            vec![[0.0, 0.0, 1.0], [2.0, 0.0, 0.0], [0.0, 3.0, 0.5]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let [a, b, c] = m.triangle(0);
        let n = cross(sub(b, a), sub(c, a));
        let area2 = dot(n, n).sqrt();
        for p in sample_surface(&m, 1000, 7).points() {
            let off = dot(sub(*p, a), n) / area2;
            assert!(off.abs() < 1e-9);
            // barycentric coordinates from sub-triangle areas
            let wa = dot(cross(sub(b, *p), sub(c, *p)), n) / (area2 * area2);
            let wb = dot(cross(sub(c, *p), sub(a, *p)), n) / (area2 * area2);
            let wc = dot(cross(sub(a, *p), sub(b, *p)), n) / (area2 * area2);
            assert!(wa >= -1e-9 && wb >= -1e-9 && wc >= -1e-9);
            assert!((wa + wb + wc - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_points() {
        let m = TriMesh::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        assert_eq!(sample_surface(&m, 50, 3), sample_surface(&m, 50, 3));
        assert_ne!(sample_surface(&m, 50, 3), sample_surface(&m, 50, 4));
    }
}
