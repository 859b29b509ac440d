//! Exact nearest-neighbor search over 3D points.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    dx * dx + dy * dy + dz * dz
}

/// Balanced median-split tree stored implicitly: the node of the index range
/// `lo..hi` sits at its midpoint, with the left subtree below and the right
/// subtree above it.
#[derive(Debug, Clone, PartialEq)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    order: Vec<usize>,
    axes: Vec<u8>,
}

impl KdTree {
    pub fn build(points: &[[f64; 3]]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite point in cloud".into()));
        }
        let mut tree = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            axes: alloc::vec![0; points.len()],
        };
        tree.split(0, points.len());
        Ok(tree)
    }

    fn split(&mut self, lo: usize, hi: usize) {
        if hi - lo <= 1 {
            return;
        }
        let axis = self.widest_axis(lo, hi);
        let mid = lo + (hi - lo) / 2;
        let pts = &self.points;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        self.axes[mid] = axis as u8;
        self.split(lo, mid);
        self.split(mid + 1, hi);
    }

    fn widest_axis(&self, lo: usize, hi: usize) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for axis in 0..3 {
            let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[lo..hi] {
                let x = self.points[i][axis];
                min = min.min(x);
                max = max.max(x);
            }
            if max - min > best.1 {
                best = (axis, max - min);
            }
        }
        best.0
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the nearest point and the squared distance to it.
    pub fn nearest(&self, q: &[f64; 3]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, self.points.len(), q, &mut best);
        best
    }

    fn search(&self, lo: usize, hi: usize, q: &[f64; 3], best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let i = self.order[mid];
        let p = &self.points[i];
        let d = dist2(p, q);
        if d < best.1 || (d == best.1 && i < best.0) {
            *best = (i, d);
        }
        if hi - lo == 1 {
            return;
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, q, best);
        if diff * diff <= best.1 {
            self.search(far.0, far.1, q, best);
        }
    }

    /// Euclidean distance from `q` to the nearest point.
    pub fn nn_distance(&self, q: &[f64; 3]) -> f64 {
        math::sqrt(self.nearest(q).1)
    }
}

/// Linear-scan nearest-neighbor distance.
pub fn brute_force_nn(points: &[[f64; 3]], q: &[f64; 3]) -> f64 {
    math::sqrt(
        points
            .iter()
            .map(|p| dist2(p, q))
            .fold(f64::INFINITY, f64::min),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        let t = KdTree::build(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(t.nn_distance(&[0.4, 0.0, 0.0]), 0.4);
        assert_eq!(t.nn_distance(&[1.0, 0.0, 0.0]), 0.0);
        assert_eq!(KdTree::build(&[]), Err(Error::EmptyCloud));
    }

    #[test]
    fn duplicates_and_collinear_points() {
        let pts: Vec<[f64; 3]> = (0..50).map(|i| [(i % 5) as f64, 0.0, 0.0]).collect();
        let t = KdTree::build(&pts).unwrap();
        for k in 0..20 {
            let q = [k as f64 * 0.31 - 1.0, 0.2, -0.1];
            assert_eq!(t.nn_distance(&q), brute_force_nn(&pts, &q));
        }
    }
}
