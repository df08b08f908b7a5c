use rayon::prelude::*;

use super::MetricError;
use crate::geometry::{KdTree, PointCloud};

/// Nearest-neighbour distance from each point of `from` into `to`, in order.
fn directed(from: &PointCloud, to: &PointCloud) -> Vec<f64> {
    let tree = KdTree::new(&to.points);
    from.points
        .par_iter()
        .map(|p| tree.nearest_distance(p).expect("non-empty target"))
        .collect()
}

fn check(a: &PointCloud, b: &PointCloud) -> Result<(), MetricError> {
    if a.is_empty() || b.is_empty() {
        Err(MetricError::EmptyCloud)
    } else {
        Ok(())
    }
}

/// Symmetric mean nearest-neighbour distance: half the mean over `a` plus
/// half the mean over `b`.
pub fn pcd(a: &PointCloud, b: &PointCloud) -> Result<f64, MetricError> {
    check(a, b)?;
    let ab: f64 = directed(a, b).iter().sum();
    let ba: f64 = directed(b, a).iter().sum();
    Ok(ab / (2.0 * a.len() as f64) + ba / (2.0 * b.len() as f64))
}

/// Hausdorff distance: the larger of the two directed sup-inf distances.
pub fn hdd(a: &PointCloud, b: &PointCloud) -> Result<f64, MetricError> {
    check(a, b)?;
    let ab = directed(a, b).into_iter().fold(0.0, f64::max);
    let ba = directed(b, a).into_iter().fold(0.0, f64::max);
    Ok(ab.max(ba))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn cloud(points: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect())
    }

    #[test]
    fn identical_clouds_are_zero() {
        let a = cloud(&[[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [0.5, 0.5, 0.5]]);
        assert_eq!(pcd(&a, &a).unwrap(), 0.0);
        assert_eq!(hdd(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn single_points() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[1.0, 0.0, 0.0]]);
        assert_eq!(pcd(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn hausdorff_takes_larger_direction() {
        let a = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let b = cloud(&[[0.0, 0.0, 0.0]]);
        assert_eq!(hdd(&a, &b).unwrap(), 1.0);
        assert_eq!(hdd(&b, &a).unwrap(), 1.0);
        assert!(hdd(&a, &b).unwrap() >= pcd(&a, &b).unwrap());
    }

    #[test]
    fn empty_is_error() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let e = PointCloud::new(vec![]);
        assert_eq!(pcd(&a, &e), Err(MetricError::EmptyCloud));
        assert_eq!(hdd(&e, &a), Err(MetricError::EmptyCloud));
    }

    fn arb_cloud() -> impl proptest::strategy::Strategy<Value = PointCloud> {
        proptest::collection::vec(proptest::array::uniform3(-2.0f64..2.0), 1..60).prop_map(|p| cloud(&p))
    }

    use proptest::strategy::Strategy as _;

    proptest::proptest! {
        #[test]
        fn symmetric_and_ordered(a in arb_cloud(), b in arb_cloud()) {
            let (p, q) = (pcd(&a, &b).unwrap(), pcd(&b, &a).unwrap());
            proptest::prop_assert!((p - q).abs() <= 1e-12);
            proptest::prop_assert_eq!(hdd(&a, &b).unwrap(), hdd(&b, &a).unwrap());
            proptest::prop_assert!(p >= 0.0 && p <= hdd(&a, &b).unwrap() + 1e-12);
        }
    }
}
