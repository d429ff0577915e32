use super::geom::{scale, sub, Vec3};
use super::{MeshError, TriMesh};

#[derive(Clone, Debug)]
pub struct Normalized {
    pub meshes: Vec<TriMesh>,
    /// Multiply model-unit lengths by this to get normalized lengths.
    pub scale: f64,
    /// Bounding-box center subtracted from each mesh before scaling.
    pub centers: Vec<Vec3>,
}

/// Half of the largest bounding-box side length.
pub fn half_extent(mesh: &TriMesh) -> f64 {
    let (lo, hi) = mesh.bounds();
    (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max) / 2.0
}

pub fn bbox_center(mesh: &TriMesh) -> Vec3 {
    let (lo, hi) = mesh.bounds();
    [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, (lo[2] + hi[2]) / 2.0]
}

/// Centers every mesh on its bounding box and applies one isotropic scale so
/// the largest mesh (or `reference_half_extent`, when given) spans [-1, 1].
pub fn normalize_to_unit_box(meshes: &[TriMesh], reference_half_extent: Option<f64>) -> Result<Normalized, MeshError> {
    if meshes.is_empty() {
        return Err(MeshError::Topology("no meshes to normalize".into()));
    }
    let extent = reference_half_extent.unwrap_or_else(|| meshes.iter().map(half_extent).fold(0.0, f64::max));
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(MeshError::Topology(format!("invalid reference extent {extent}")));
    }
    let s = 1.0 / extent;
    let centers: Vec<Vec3> = meshes.iter().map(bbox_center).collect();
    let out = meshes
        .iter()
        .zip(&centers)
        .map(|(m, &c)| m.map_vertices(|v| scale(sub(v, c), s)))
        .collect::<Result<_, _>>()?;
    Ok(Normalized {
        meshes: out,
        scale: s,
        centers,
    })
}
