use serde::{Deserialize, Serialize};

use super::{hdd, icp_align, iou_dsc, pcd, IcpConfig, MetricError};
use crate::geometry::{sample_surface, TriMesh};

/// Points sampled from each surface for PCD and HDD.
pub const SURFACE_SAMPLES: usize = 10_000;

/// Every comparison metric for one generated/ground-truth pair. Fields that
/// cannot be computed are `None` and serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pcd: Option<f64>,
    pub hdd: Option<f64>,
    pub iou: Option<f64>,
    pub dsc: Option<f64>,
    pub t_err: Option<u64>,
    pub t_corr: Option<bool>,
    pub chi_gen: Option<i64>,
    pub chi_gt: Option<i64>,
    pub gen_watertight: bool,
    pub gt_watertight: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Topology {
    pub t_err: Option<u64>,
    pub t_corr: Option<bool>,
    pub chi_gen: Option<i64>,
    pub chi_gt: Option<i64>,
}

/// Euler-characteristic comparison. Undefined unless both meshes are closed.
pub fn topology(gen: &TriMesh, gt: &TriMesh) -> Topology {
    if !gen.is_watertight() || !gt.is_watertight() {
        return Topology {
            t_err: None,
            t_corr: None,
            chi_gen: None,
            chi_gt: None,
        };
    }
    let (a, b) = (gen.euler_characteristic(), gt.euler_characteristic());
    Topology {
        t_err: Some(a.abs_diff(b)),
        t_corr: Some(a == b),
        chi_gen: Some(a),
        chi_gt: Some(b),
    }
}

impl MetricReport {
    /// Report for a generation that produced no mesh at all.
    pub fn missing_generation(gt: &TriMesh) -> Self {
        Self {
            pcd: None,
            hdd: None,
            iou: None,
            dsc: None,
            t_err: None,
            t_corr: None,
            chi_gen: None,
            chi_gt: None,
            gen_watertight: false,
            gt_watertight: gt.is_watertight(),
        }
    }
}

/// The topology half of [`full_report`]; spatial fields stay `None`.
pub fn topology_report(gen: &TriMesh, gt: &TriMesh) -> MetricReport {
    let t = topology(gen, gt);
    MetricReport {
        pcd: None,
        hdd: None,
        iou: None,
        dsc: None,
        t_err: t.t_err,
        t_corr: t.t_corr,
        chi_gen: t.chi_gen,
        chi_gt: t.chi_gt,
        gen_watertight: gen.is_watertight(),
        gt_watertight: gt.is_watertight(),
    }
}

/// Compares `gen` against `gt`.
///
/// Topology uses the meshes as given. Both are then normalized and `gen` is
/// aligned onto `gt` by ICP before the surface and volume metrics; the volume
/// pair is skipped unless both meshes are closed.
pub fn full_report(
    gen: &TriMesh,
    gt: &TriMesh,
    cfg: &IcpConfig,
    resolution: usize,
    seed: u64,
) -> Result<MetricReport, MetricError> {
    let topo = topology(gen, gt);
    let (gen_n, _) = gen.normalize()?;
    let (gt_n, _) = gt.normalize()?;
    let aligned = icp_align(&gen_n, &gt_n, cfg)?.mesh;

    let a = sample_surface(&aligned, SURFACE_SAMPLES, seed)?;
    let b = sample_surface(&gt_n, SURFACE_SAMPLES, seed)?;
    let gen_watertight = gen.is_watertight();
    let gt_watertight = gt.is_watertight();
    let (iou, dsc) = if gen_watertight && gt_watertight {
        let (i, d) = iou_dsc(&aligned, &gt_n, resolution)?;
        (Some(i), Some(d))
    } else {
        (None, None)
    };
    Ok(MetricReport {
        pcd: Some(pcd(&a, &b)?),
        hdd: Some(hdd(&a, &b)?),
        iou,
        dsc,
        t_err: topo.t_err,
        t_corr: topo.t_corr,
        chi_gen: topo.chi_gen,
        chi_gt: topo.chi_gt,
        gen_watertight,
        gt_watertight,
    })
}
