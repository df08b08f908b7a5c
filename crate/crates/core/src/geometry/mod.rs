//! Mesh substrate shared by every metric: indexed triangle meshes, STL I/O,
//! surface sampling, voxel occupancy and an exact nearest-neighbour index.

mod kdtree;
pub(crate) mod mesh;
mod sample;
pub mod stl;
mod voxel;

pub use kdtree::KdTree;
pub use mesh::{Aabb, NormalizeTransform, RigidTransform, TriMesh, WELD_GRID};
pub use sample::{sample_surface, PointCloud};
pub use stl::{load_stl, write_stl};
pub use voxel::{voxelize, VoxelGrid};

use thiserror::Error;

/// Model-space coordinate.
pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("malformed STL at byte {offset}: {reason}")]
    MalformedStl { offset: usize, reason: String },
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),
    #[error("mesh is not watertight")]
    NotWatertight,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
