//! Bounding-volume hierarchy over mesh triangles.

use super::geom::{dist2, Vec3};
use super::distance::closest_point_on_triangle;
use super::TriMesh;

const LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
        }
    }

    fn grow(&mut self, p: Vec3) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    fn merge(&mut self, o: &Aabb) {
        self.grow(o.min);
        self.grow(o.max);
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= o.max[k] && o.min[k] <= self.max[k])
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn dist2(&self, p: Vec3) -> f64 {
        (0..3)
            .map(|k| {
                let d = (self.min[k] - p[k]).max(0.0).max(p[k] - self.max[k]);
                d * d
            })
            .sum()
    }
}

#[derive(Debug)]
pub(crate) struct BvhNode {
    pub bounds: Aabb,
    pub kind: NodeKind,
}

#[derive(Debug)]
pub(crate) enum NodeKind {
    Leaf { start: usize, end: usize },
    Inner { left: usize, right: usize },
}

/// Median-split BVH; leaves reference faces through `order`.
#[derive(Debug)]
pub struct Bvh<'a> {
    mesh: &'a TriMesh,
    pub(crate) order: Vec<usize>,
    pub(crate) nodes: Vec<BvhNode>,
}

impl<'a> Bvh<'a> {
    pub fn new(mesh: &'a TriMesh) -> Self {
        let boxes: Vec<Aabb> = (0..mesh.face_count())
            .map(|f| {
                let mut b = Aabb::empty();
                for p in mesh.triangle(f) {
                    b.grow(p);
                }
                b
            })
            .collect();
        let centers: Vec<Vec3> = boxes
            .iter()
            .map(|b| [0.5 * (b.min[0] + b.max[0]), 0.5 * (b.min[1] + b.max[1]), 0.5 * (b.min[2] + b.max[2])])
            .collect();
        let mut bvh = Self {
            mesh,
            order: (0..mesh.face_count()).collect(),
            nodes: Vec::new(),
        };
        bvh.build(0, mesh.face_count(), &boxes, &centers);
        bvh
    }

    pub fn mesh(&self) -> &TriMesh {
        self.mesh
    }

    fn build(&mut self, start: usize, end: usize, boxes: &[Aabb], centers: &[Vec3]) -> usize {
        let mut bounds = Aabb::empty();
        let mut cb = Aabb::empty();
        for &f in &self.order[start..end] {
            bounds.merge(&boxes[f]);
            cb.grow(centers[f]);
        }
        let id = self.nodes.len();
        self.nodes.push(BvhNode {
            bounds,
            kind: NodeKind::Leaf { start, end },
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let axis = (0..3)
            .max_by(|&a, &b| (cb.max[a] - cb.min[a]).total_cmp(&(cb.max[b] - cb.min[b])))
            .expect("three axes");
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centers[a][axis].total_cmp(&centers[b][axis]).then(a.cmp(&b))
        });
        let left = self.build(start, mid, boxes, centers);
        let right = self.build(mid, end, boxes, centers);
        self.nodes[id].kind = NodeKind::Inner { left, right };
        id
    }

    /// Closest surface point to `p`: `(face, point, squared distance)`.
    pub fn closest_point(&self, p: Vec3) -> (usize, Vec3, f64) {
        let mut best = (usize::MAX, [0.0; 3], f64::INFINITY);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.bounds.dist2(p) > best.2 {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &f in &self.order[start..end] {
                        let [a, b, c] = self.mesh.triangle(f);
                        let q = closest_point_on_triangle(p, a, b, c);
                        let d = dist2(p, q);
                        if d < best.2 || (d == best.2 && f < best.0) {
                            best = (f, q, d);
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let (dl, dr) = (self.nodes[left].bounds.dist2(p), self.nodes[right].bounds.dist2(p));
                    // visit the nearer child first
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }

    pub fn distance(&self, p: Vec3) -> f64 {
        self.closest_point(p).2.sqrt()
    }

    /// All face pairs `(i, j)`, `i < j`, whose bounding boxes overlap.
    pub fn overlapping_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let mut stack = vec![(0usize, 0usize)];
        while let Some((a, b)) = stack.pop() {
            let (na, nb) = (&self.nodes[a], &self.nodes[b]);
            if !na.bounds.overlaps(&nb.bounds) {
                continue;
            }
            match (&na.kind, &nb.kind) {
                (NodeKind::Leaf { start: s1, end: e1 }, NodeKind::Leaf { start: s2, end: e2 }) => {
                    for (ii, &f) in self.order[*s1..*e1].iter().enumerate() {
                        let inner = if a == b { &self.order[*s1 + ii + 1..*e1] } else { &self.order[*s2..*e2] };
                        for &g in inner {
                            out.push((f.min(g), f.max(g)));
                        }
                    }
                }
                (NodeKind::Inner { left, right }, _) if a == b => {
                    stack.push((*left, *left));
                    stack.push((*right, *right));
                    stack.push((*left, *right));
                }
                (NodeKind::Inner { left, right }, NodeKind::Leaf { .. }) => {
                    stack.push((*left, b));
                    stack.push((*right, b));
                }
                (NodeKind::Leaf { .. }, NodeKind::Inner { left, right }) => {
                    stack.push((a, *left));
                    stack.push((a, *right));
                }
                (NodeKind::Inner { left: l1, right: r1 }, NodeKind::Inner { left: l2, right: r2 }) => {
                    stack.push((*l1, *l2));
                    stack.push((*l1, *r2));
                    stack.push((*r1, *l2));
                    stack.push((*r1, *r2));
                }
            }
        }
        out.sort_unstable();
        out
    }
}
