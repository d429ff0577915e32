//! Triangle meshes and point sets: I/O, sampling, distances, alignment and
//! self-intersection tests.

mod bvh;
pub mod distance;
pub mod fps;
pub mod geom;
pub mod icp;
pub mod intersect;
pub mod io;
pub mod kdtree;
pub mod normalize;
pub mod sampling;
mod types;

use thiserror::Error;

pub use bvh::{Aabb, Bvh};
pub use distance::{
    average_symmetric_surface_distance, chamfer_distance, closest_point_on_triangle, mean_point_to_surface,
    point_triangle_distance, ChamferMode,
};
pub use fps::farthest_point_sample;
pub use geom::Vec3;
pub use icp::{icp_align, IcpResult, RigidTransform};
pub use intersect::{count_self_intersections, count_self_intersections_exhaustive, triangles_intersect, SelfIntersection};
pub use io::{load_mesh, load_mesh_auto, save_mesh, MeshFormat, PlyEncoding};
pub use kdtree::{nearest_neighbor, KdTree};
pub use normalize::{normalize_to_unit_box, Normalized};
pub use sampling::{sample_surface, sample_surface_with, SurfaceSampler};
pub use types::{PointSet, PointSource, TriMesh};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("point set is empty")]
    EmptyPointSet,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MeshError {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Self::Parse { line, msg: msg.into() }
    }
}
