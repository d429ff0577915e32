use super::geom::{centroid, dist2, Vec3};
use super::sampling::sample_surface;
use super::{PointSet, PointSource, TriMesh};

/// Size of the dense surface sample that [`farthest_point_sample`] draws from.
pub fn dense_sample_count(m: usize) -> usize {
    (20 * m).max(4000)
}

/// Greedy farthest-point selection. Starts at the point nearest the centroid;
/// ties go to the smaller index.
pub fn farthest_point_indices(points: &[Vec3], m: usize) -> Vec<usize> {
    assert!(m >= 1 && !points.is_empty());
    let c = centroid(points);
    let first = (0..points.len())
        .min_by(|&a, &b| dist2(points[a], c).total_cmp(&dist2(points[b], c)).then(a.cmp(&b)))
        .expect("non-empty");
    let mut chosen = vec![first];
    let mut mind: Vec<f64> = points.iter().map(|&p| dist2(p, points[first])).collect();
    while chosen.len() < m.min(points.len()) {
        let mut best = 0;
        for i in 1..points.len() {
            if mind[i] > mind[best] {
                best = i;
            }
        }
        chosen.push(best);
        for (d, &p) in mind.iter_mut().zip(points) {
            *d = d.min(dist2(p, points[best]));
        }
    }
    chosen
}

/// `m` well-spread surface points chosen greedily from a dense area-uniform
/// sample of `mesh`.
pub fn farthest_point_sample(mesh: &TriMesh, m: usize, seed: u64) -> PointSet {
    let dense = sample_surface(mesh, dense_sample_count(m), seed);
    let pts = farthest_point_indices(dense.points(), m)
        .into_iter()
        .map(|i| dense.points()[i])
        .collect();
    PointSet::new(pts, PointSource::MeshSampled).expect("surface points are finite")
}
