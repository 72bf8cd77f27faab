//! Axis-aligned bounding-box tree over indexed primitives.
//!
//! Built once by median splits along the longest centroid axis; leaves hold
//! at most [`LEAF_SIZE`] items. Used for strut lattices, tetrahedron point
//! location and closest-triangle queries.

use crate::geom::{BBox, Vec3};

pub const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    bbox: BBox,
    /// Leaf: `start..start + count` in `order`. Inner: `count == 0`,
    /// children at `start` and `start + 1`.
    start: u32,
    count: u32,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(boxes: &[BBox]) -> Bvh {
        let mut order: Vec<u32> = (0..boxes.len() as u32).collect();
        let centroids: Vec<Vec3> = boxes.iter().map(BBox::center).collect();
        let mut nodes = vec![Node { bbox: BBox::empty(), start: 0, count: 0 }];
        if !boxes.is_empty() {
            build_rec(boxes, &centroids, &mut order, 0, boxes.len(), 0, &mut nodes);
        }
        Bvh { nodes, order }
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn bounds(&self) -> BBox {
        self.nodes[0].bbox
    }

    /// Calls `f` for every item whose leaf box chain contains `p`.
    pub fn for_each_containing(&self, p: &Vec3, mut f: impl FnMut(usize)) {
        self.for_each_near(p, 0.0, &mut f)
    }

    /// Calls `f` for every item whose box, grown by `tol`, contains `p`.
    pub fn for_each_near(&self, p: &Vec3, tol: f64, mut f: impl FnMut(usize)) {
        if self.is_empty() {
            return;
        }
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let n = &self.nodes[ni as usize];
            if n.bbox.distance(p) > tol {
                continue;
            }
            if n.count > 0 {
                for &item in &self.order[n.start as usize..(n.start + n.count) as usize] {
                    f(item as usize);
                }
            } else {
                stack.push(n.start);
                stack.push(n.start + 1);
            }
        }
    }

    /// Branch-and-bound minimum of `dist(item)`.
    ///
    /// `dist` must never be smaller than the distance from `p` to the item's
    /// box, except inside the box where it may go down to `inside_bound`.
    /// Ties resolve to the lowest item index.
    pub fn nearest(&self, p: &Vec3, inside_bound: f64, mut dist: impl FnMut(usize) -> f64) -> Option<(f64, usize)> {
        if self.is_empty() {
            return None;
        }
        let lower = |b: &BBox| {
            let d = b.distance(p);
            if d > 0.0 {
                d
            } else {
                inside_bound
            }
        };
        let mut best: Option<(f64, usize)> = None;
        let mut stack: Vec<(f64, u32)> = vec![(lower(&self.nodes[0].bbox), 0)];
        while let Some((lb, ni)) = stack.pop() {
            if best.is_some_and(|(bd, _)| lb > bd) {
                continue;
            }
            let n = &self.nodes[ni as usize];
            if n.count > 0 {
                for &item in &self.order[n.start as usize..(n.start + n.count) as usize] {
                    let item = item as usize;
                    let d = dist(item);
                    let better = match best {
                        None => true,
                        Some((bd, bi)) => d < bd || (d == bd && item < bi),
                    };
                    if better {
                        best = Some((d, item));
                    }
                }
            } else {
                let (l, r) = (n.start, n.start + 1);
                let ll = lower(&self.nodes[l as usize].bbox);
                let rl = lower(&self.nodes[r as usize].bbox);
                if ll <= rl {
                    stack.push((rl, r));
                    stack.push((ll, l));
                } else {
                    stack.push((ll, l));
                    stack.push((rl, r));
                }
            }
        }
        best
    }

    /// Checks the containment invariants; used by tests.
    pub fn validate(&self, boxes: &[BBox]) -> bool {
        let mut seen = vec![0u32; boxes.len()];
        let mut ok = true;
        for n in &self.nodes {
            if n.count > 0 {
                for &i in &self.order[n.start as usize..(n.start + n.count) as usize] {
                    seen[i as usize] += 1;
                    let b = &boxes[i as usize];
                    ok &= n.bbox.union(b) == n.bbox;
                }
            } else if !self.order.is_empty() {
                for c in [n.start, n.start + 1] {
                    let cb = &self.nodes[c as usize].bbox;
                    ok &= n.bbox.union(cb) == n.bbox;
                }
            }
        }
        ok && seen.iter().all(|&c| c == 1)
    }
}

fn build_rec(
    boxes: &[BBox],
    centroids: &[Vec3],
    order: &mut [u32],
    start: usize,
    end: usize,
    node: usize,
    nodes: &mut Vec<Node>,
) {
    let slice = &mut order[start..end];
    let bbox = slice.iter().fold(BBox::empty(), |acc, &i| acc.union(&boxes[i as usize]));
    if slice.len() <= LEAF_SIZE {
        nodes[node] = Node { bbox, start: start as u32, count: slice.len() as u32 };
        return;
    }
    let cb = BBox::from_points(slice.iter().map(|&i| &centroids[i as usize]));
    let axis = cb.longest_axis();
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        let (ca, cb) = (centroids[a as usize][axis], centroids[b as usize][axis]);
        ca.total_cmp(&cb).then(a.cmp(&b))
    });
    let left = nodes.len();
    nodes.push(Node { bbox: BBox::empty(), start: 0, count: 0 });
    nodes.push(Node { bbox: BBox::empty(), start: 0, count: 0 });
    nodes[node] = Node { bbox, start: left as u32, count: 0 };
    build_rec(boxes, centroids, order, start, start + mid, left, nodes);
    build_rec(boxes, centroids, order, start + mid, end, left + 1, nodes);
}
