use super::MetricError;
use crate::geometry::{voxelize, TriMesh};

pub const DEFAULT_RESOLUTION: usize = 64;
/// Fraction by which the union bounding box is grown before voxelizing.
pub const UNION_PADDING: f64 = 0.02;

/// Volumetric IoU and Dice coefficient of two closed solids, from occupancy
/// over a shared grid spanning both.
pub fn iou_dsc(a: &TriMesh, b: &TriMesh, resolution: usize) -> Result<(f64, f64), MetricError> {
    if !a.is_watertight() || !b.is_watertight() {
        return Err(MetricError::NotWatertight);
    }
    let (Some(ba), Some(bb)) = (a.aabb(), b.aabb()) else {
        return Err(MetricError::EmptyUnion);
    };
    let bounds = ba.union(&bb).padded(UNION_PADDING);
    let ga = voxelize(a, &bounds, resolution)?;
    let gb = voxelize(b, &bounds, resolution)?;
    let (mut inter, mut union, mut na, mut nb) = (0usize, 0usize, 0usize, 0usize);
    for (&x, &y) in ga.occupancy.iter().zip(&gb.occupancy) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
        na += x as usize;
        nb += y as usize;
    }
    if union == 0 {
        return Err(MetricError::EmptyUnion);
    }
    let iou = inter as f64 / union as f64;
    let dsc = 2.0 * inter as f64 / (na + nb) as f64;
    Ok((iou, dsc))
}
