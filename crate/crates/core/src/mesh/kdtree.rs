//! Exact nearest-neighbour queries over 3D points.

use rayon::prelude::*;

use super::geom::{dist2, Vec3};
use super::PointSet;

const LEAF_SIZE: usize = 8;

#[derive(Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static k-d tree. Queries return the closest point; among equidistant
/// points the smallest original index wins.
#[derive(Debug)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut tree = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
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

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for k in 0..3 {
                lo[k] = lo[k].min(self.points[i][k]);
                hi[k] = hi[k].max(self.points[i][k]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .expect("three axes");
        let mid = (start + end) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// `(index, squared distance)` of the nearest point.
    pub fn nearest2(&self, q: Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        Some(best)
    }

    pub fn nearest(&self, q: Vec3) -> Option<(usize, f64)> {
        self.nearest2(q).map(|(i, d2)| (i, d2.sqrt()))
    }

    fn search(&self, node: usize, q: Vec3, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = dist2(q, self.points[i]);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // `<=` keeps equidistant candidates with smaller indices reachable.
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

/// Nearest reference point for each query point, as `(index, distance)`.
pub fn nearest_neighbor(query: &PointSet, reference: &PointSet) -> Vec<(usize, f64)> {
    let tree = KdTree::new(reference.points());
    query
        .points()
        .par_iter()
        .map(|&q| tree.nearest(q).expect("reference is non-empty"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_query_returns_self() {
        let pts: Vec<Vec3> = (0..50).map(|i| [i as f64, (i * i % 7) as f64, 0.5 * i as f64]).collect();
        let tree = KdTree::new(&pts);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(tree.nearest(*p), Some((i, 0.0)));
        }
    }

    #[test]
    fn ties_resolve_to_smallest_index() {
        let mut pts = vec![[10.0, 10.0, 10.0]; 8];
        pts[2] = [1.0, 0.0, 0.0];
        pts[5] = [-1.0, 0.0, 0.0];
        let tree = KdTree::new(&pts);
        assert_eq!(tree.nearest([0.0; 3]).unwrap().0, 2);
        // many duplicates spread over several leaves
        let dup = vec![[0.5, 0.5, 0.5]; 100];
        assert_eq!(KdTree::new(&dup).nearest([0.0; 3]).unwrap().0, 0);
    }
}
