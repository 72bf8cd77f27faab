//! Marching cubes with a case table derived from per-face rules.
//!
//! On every cube face the edge crossings are joined by segments that cut
//! inside corners off from outside ones; on a face with two diagonal inside
//! corners each inside corner is cut off separately. Both cubes sharing a
//! face apply the same rule, so the surface is closed. Segments are
//! directed so that, seen from outside the cube, the inside region lies to
//! their right; chaining them gives loops wound counter-clockwise about the
//! outward surface normal, which are fan-triangulated.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::geom::Vec3;
use crate::surface::TriangleMesh;

/// Corner `i` sits at `(i & 1, (i >> 1) & 1, (i >> 2) & 1)`.
fn corner(i: usize) -> [i64; 3] {
    [(i & 1) as i64, ((i >> 1) & 1) as i64, ((i >> 2) & 1) as i64]
}

/// Cube edges as (low corner, high corner), four per axis.
pub(crate) const EDGES: [(usize, usize); 12] =
    [(0, 1), (2, 3), (4, 5), (6, 7), (0, 2), (1, 3), (4, 6), (5, 7), (0, 4), (1, 5), (2, 6), (3, 7)];

fn edge_between(a: usize, b: usize) -> usize {
    let (a, b) = (a.min(b), a.max(b));
    EDGES.iter().position(|&e| e == (a, b)).expect("adjacent corners")
}

fn edge_axis(e: usize) -> usize {
    e / 4
}

/// For each of the 256 inside/outside patterns, the loops of crossed edges.
pub(crate) fn case_table() -> &'static [Vec<Vec<u8>>; 256] {
    static TABLE: OnceLock<[Vec<Vec<u8>>; 256]> = OnceLock::new();
    TABLE.get_or_init(|| std::array::from_fn(build_case))
}

fn build_case(case: usize) -> Vec<Vec<u8>> {
    let inside = |c: usize| case >> c & 1 == 1;
    let mid = |e: usize| {
        let (a, b) = EDGES[e];
        let (pa, pb) = (corner(a), corner(b));
        [0, 1, 2].map(|k| (pa[k] + pb[k]) as f64 / 2.0)
    };
    let mut next = [usize::MAX; 12];
    for axis in 0..3 {
        for side in 0..2 {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            let at = |du: usize, dv: usize| (side << axis) | (du << u) | (dv << v);
            let ring = [at(0, 0), at(1, 0), at(1, 1), at(0, 1)];
            let mut normal = [0.0; 3];
            normal[axis] = if side == 1 { 1.0 } else { -1.0 };
            let ins: Vec<bool> = ring.iter().map(|&c| inside(c)).collect();
            let count = ins.iter().filter(|&&b| b).count();
            // corners cut off individually by a segment around them
            let mut cut: Vec<usize> = Vec::new();
            match count {
                1 | 3 => cut.push((0..4).find(|&k| ins[k] == (count == 1)).unwrap()),
                2 => {
                    if let Some(k) = (0..4).find(|&k| ins[k] && ins[(k + 1) % 4]) {
                        // the segment runs across the face, between the inside pair and the outside pair
                        let ea = edge_between(ring[(k + 3) % 4], ring[k]);
                        let eb = edge_between(ring[(k + 1) % 4], ring[(k + 2) % 4]);
                        link(&mut next, ea, eb, mid(ea), mid(eb), normal, corner(ring[k]), true);
                    } else {
                        cut.extend((0..4).filter(|&k| ins[k]));
                    }
                }
                _ => {}
            }
            for k in cut {
                let ea = edge_between(ring[(k + 3) % 4], ring[k]);
                let eb = edge_between(ring[k], ring[(k + 1) % 4]);
                link(&mut next, ea, eb, mid(ea), mid(eb), normal, corner(ring[k]), ins[k]);
            }
        }
    }
    let mut loops = Vec::new();
    let mut seen = [false; 12];
    for start in 0..12 {
        if next[start] == usize::MAX || seen[start] {
            continue;
        }
        let mut lp = Vec::new();
        let mut e = start;
        while !seen[e] {
            seen[e] = true;
            lp.push(e as u8);
            e = next[e];
        }
        debug_assert_eq!(e, start);
        loops.push(lp);
    }
    loops
}

/// Records the segment between crossings on edges `a` and `b`, directed so
/// that `q` (inside iff `q_inside`) ends up on the correct side.
#[allow(clippy::too_many_arguments)]
fn link(next: &mut [usize; 12], a: usize, b: usize, ma: [f64; 3], mb: [f64; 3], n: [f64; 3], q: [i64; 3], q_inside: bool) {
    let d = [mb[0] - ma[0], mb[1] - ma[1], mb[2] - ma[2]];
    let left = [n[1] * d[2] - n[2] * d[1], n[2] * d[0] - n[0] * d[2], n[0] * d[1] - n[1] * d[0]];
    let s: f64 = (0..3).map(|k| left[k] * (q[k] as f64 - 0.5 * (ma[k] + mb[k]))).sum();
    // left of the segment must face the outside region
    let forward = (s > 0.0) != q_inside;
    let (from, to) = if forward { (a, b) } else { (b, a) };
    debug_assert_eq!(next[from], usize::MAX);
    next[from] = to;
}

/// Scalar samples on a regular lattice; node `(i, j, k)` sits at
/// `origin + (i, j, k)·spacing`. Values `≤ 0` are inside.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrid {
    pub origin: Vec3,
    pub spacing: f64,
    pub dims: [usize; 3],
    pub values: Vec<f32>,
}

impl DenseGrid {
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.spacing
    }

    pub fn interior_count(&self) -> usize {
        self.values.iter().filter(|v| **v <= 0.0).count()
    }
}

const T_MIN: f64 = 1e-4;

/// Iso-surface at 0. Vertices on shared grid edges are merged; the result
/// is closed whenever no inside node lies on the grid border.
pub fn marching_cubes(grid: &DenseGrid) -> TriangleMesh {
    let table = case_table();
    let [nx, ny, nz] = grid.dims;
    let mut mesh = TriangleMesh::default();
    if nx < 2 || ny < 2 || nz < 2 {
        return mesh;
    }
    let mut vertex_of: HashMap<(usize, usize), u32> = HashMap::new();
    let mut ring: Vec<u32> = Vec::with_capacity(12);
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut vals = [0f32; 8];
                let mut case = 0usize;
                for (c, v) in vals.iter_mut().enumerate() {
                    let p = corner(c);
                    *v = grid.values[grid.index(i + p[0] as usize, j + p[1] as usize, k + p[2] as usize)];
                    if *v <= 0.0 {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                for lp in &table[case] {
                    ring.clear();
                    for &e in lp {
                        let (a, b) = EDGES[e as usize];
                        let pa = corner(a);
                        let node = grid.index(i + pa[0] as usize, j + pa[1] as usize, k + pa[2] as usize);
                        let key = (node, edge_axis(e as usize));
                        let id = *vertex_of.entry(key).or_insert_with(|| {
                            let (va, vb) = (vals[a] as f64, vals[b] as f64);
                            let t = (va / (va - vb)).clamp(T_MIN, 1.0 - T_MIN);
                            let p0 = grid.node(i + pa[0] as usize, j + pa[1] as usize, k + pa[2] as usize);
                            let mut p = p0;
                            p[edge_axis(e as usize)] += t * grid.spacing;
                            mesh.vertices.push(p);
                            (mesh.vertices.len() - 1) as u32
                        });
                        ring.push(id);
                    }
                    for t in 1..ring.len() - 1 {
                        mesh.triangles.push([ring[0], ring[t], ring[t + 1]]);
                    }
                }
            }
        }
    }
    mesh
}
