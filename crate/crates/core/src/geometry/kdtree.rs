use super::Vec3;

/// Exact nearest-neighbour index over a fixed point set.
///
/// Balanced by median splits on the widest axis; queries return the true
/// minimum squared Euclidean distance, so results match a brute-force scan.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    // Permutation of point indices arranged as an implicit tree.
    order: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    start: u32,
    end: u32,
    axis: u8,
    split: f64,
    left: u32,
    right: u32,
}

const LEAF_SIZE: usize = 8;
const NONE: u32 = u32::MAX;

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            start: start as u32,
            end: end as u32,
            axis: 0,
            split: 0.0,
            left: NONE,
            right: NONE,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let slice = &self.order[start..end];
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &i in slice {
            let p = &self.points[i as usize];
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let axis = (hi - lo).imax();
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a as usize][axis].total_cmp(&points[b as usize][axis])
        });
        let split = self.points[self.order[mid] as usize][axis];
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        let node = &mut self.nodes[id as usize];
        node.axis = axis as u8;
        node.split = split;
        node.left = left;
        node.right = right;
        id
    }

    /// Index and squared distance of the nearest stored point.
    pub fn nearest(&self, q: &Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        Some(best)
    }

    pub fn nearest_distance(&self, q: &Vec3) -> Option<f64> {
        self.nearest(q).map(|(_, d2)| d2.sqrt())
    }

    fn search(&self, node: u32, q: &Vec3, best: &mut (usize, f64)) {
        let n = self.nodes[node as usize];
        if n.left == NONE {
            for &i in &self.order[n.start as usize..n.end as usize] {
                let d2 = (self.points[i as usize] - q).norm_squared();
                if d2 < best.1 || (d2 == best.1 && (i as usize) < best.0) {
                    *best = (i as usize, d2);
                }
            }
            return;
        }
        let axis = n.axis as usize;
        let diff = q[axis] - n.split;
        let (near, far) = if diff < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.search(near, q, best);
        if diff * diff <= best.1 {
            self.search(far, q, best);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Vec3> = (0..1000)
            .map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let tree = KdTree::new(&pts);
        for _ in 0..500 {
            let q = Vec3::new(rng.gen_range(-0.2..1.2), rng.gen(), rng.gen());
            let brute = pts
                .iter()
                .map(|p| (p - q).norm_squared())
                .fold(f64::INFINITY, f64::min);
            assert_eq!(tree.nearest(&q).unwrap().1, brute);
        }
    }

    #[test]
    fn duplicate_points_and_empty() {
        assert!(KdTree::new(&[]).nearest(&Vec3::zeros()).is_none());
        let pts = vec![Vec3::new(1.0, 1.0, 1.0); 40];
        let tree = KdTree::new(&pts);
        assert_eq!(tree.nearest(&Vec3::new(1.0, 1.0, 2.0)).unwrap().1, 1.0);
    }
}
