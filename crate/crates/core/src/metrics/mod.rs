//! Object-comparison metrics: surface distances (PCD, HDD), volumetric
//! overlap (IoU, DSC), and the Euler-characteristic topology pair
//! (T_err, T_corr), plus the normalize-then-ICP alignment that precedes the
//! spatial ones.

mod distance;
mod icp;
mod overlap;
mod report;

pub use distance::{hdd, pcd};
pub use icp::{icp_align, kabsch, IcpConfig, IcpResult};
pub use overlap::{iou_dsc, DEFAULT_RESOLUTION, UNION_PADDING};
pub use report::{full_report, topology, topology_report, MetricReport, Topology, SURFACE_SAMPLES};

use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("both solids are empty over the voxel grid")]
    EmptyUnion,
    #[error("mesh is not watertight")]
    NotWatertight,
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl From<GeometryError> for MetricError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::NotWatertight => MetricError::NotWatertight,
            GeometryError::DegenerateMesh(m) => MetricError::DegenerateMesh(m),
            other => MetricError::DegenerateMesh(other.to_string()),
        }
    }
}
