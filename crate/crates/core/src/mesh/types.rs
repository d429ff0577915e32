use super::geom::{sub, cross, norm, Vec3};
use super::MeshError;

/// Indexed triangle surface.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Builds a mesh, checking index range, face degeneracy, finiteness and
    /// that the total surface area is positive.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let mesh = Self { vertices, faces };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if self.faces.is_empty() {
            return Err(MeshError::Topology("mesh has no faces".into()));
        }
        let n = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= n) {
                return Err(MeshError::Topology(format!(
                    "face {fi} references vertex {bad} but the mesh has {n} vertices"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::Topology(format!("face {fi} is degenerate: {f:?}")));
            }
        }
        if self.vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(MeshError::NonFinite);
        }
        if !(self.area() > 0.0) {
            return Err(MeshError::Topology("total face area is zero".into()));
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Same connectivity, new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self, MeshError> {
        if vertices.len() != self.vertices.len() {
            return Err(MeshError::Topology(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        Self::new(vertices, self.faces.clone())
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.triangle(f);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        bounds_of(&self.vertices)
    }

    pub fn map_vertices(&self, f: impl Fn(Vec3) -> Vec3) -> Result<Self, MeshError> {
        self.with_vertices(self.vertices.iter().map(|&v| f(v)).collect())
    }
}

pub(crate) fn bounds_of(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

/// Where a point set came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointSource {
    MeshSampled,
    External,
}

/// Non-empty set of finite 3D points.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    points: Vec<Vec3>,
    source: PointSource,
}

impl PointSet {
    pub fn new(points: Vec<Vec3>, source: PointSource) -> Result<Self, MeshError> {
        if points.is_empty() {
            return Err(MeshError::EmptyPointSet);
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(MeshError::NonFinite);
        }
        Ok(Self { points, source })
    }

    pub fn external(points: Vec<Vec3>) -> Result<Self, MeshError> {
        Self::new(points, PointSource::External)
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn source(&self) -> PointSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }
}

impl From<&TriMesh> for PointSet {
    /// The mesh vertices as an external point set.
    fn from(mesh: &TriMesh) -> Self {
        Self {
            points: mesh.vertices.clone(),
            source: PointSource::External,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> (Vec<Vec3>, Vec<[usize; 3]>) {
        (vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]])
    }

    #[test]
    fn rejects_out_of_range_and_degenerate_faces() {
        let (v, _) = tri();
        assert!(matches!(TriMesh::new(v.clone(), vec![[0, 1, 3]]), Err(MeshError::Topology(_))));
        assert!(matches!(TriMesh::new(v.clone(), vec![[0, 1, 1]]), Err(MeshError::Topology(_))));
        assert!(matches!(TriMesh::new(v, vec![]), Err(MeshError::Topology(_))));
    }

    #[test]
    fn rejects_zero_area() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert!(TriMesh::new(v, vec![[0, 1, 2]]).is_err());
    }

    #[test]
    fn area_of_right_triangle() {
        let (v, f) = tri();
        assert_eq!(TriMesh::new(v, f).unwrap().area(), 0.5);
    }

    #[test]
    fn point_set_must_be_finite_and_non_empty() {
        assert!(PointSet::external(vec![]).is_err());
        assert!(PointSet::external(vec![[f64::NAN, 0.0, 0.0]]).is_err());
    }
}
