//! Adaptive C3D4 export.
//!
//! A grid of `max_cell` cubes covering the design bounds is refined as an
//! octree until every leaf is no larger than the sizing field at its center,
//! then 2:1 balanced across faces, edges and corners. Each leaf is split into
//! tets joining its center to a triangulation of its six faces. A face whose
//! neighbor is finer is subdivided to match it, and a face with refined
//! neighbors along an edge is fanned from its center, so both sides of every
//! face produce the same triangles.
//!
//! All octree geometry is done on integer coordinates at twice the finest
//! resolution, so shared vertices and templates match exactly.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;

use super::{heterogeneity, mixing_materials, tet_volume, ExportOptions, ExportReport, FeaError, FeaMesh, SizingField};
use crate::design::Design;
use crate::dither::assign_material;
use crate::geom::{cell_count, Vec3};
use crate::inp::ElementType;
use crate::material::MaterialId;

/// Deepest octree level below a `max_cell` cube.
pub const MAX_DEPTH: u8 = 12;

/// Snaps that shrink an incident tet below this share of its volume are undone.
const MIN_SNAP_RATIO: f64 = 0.1;

type IVec = [i64; 3];
type Key = (u8, IVec);

struct Octree<'a> {
    design: &'a Design,
    sizing: &'a SizingField,
    origin: Vec3,
    root: f64,
    dims: IVec,
    materials: usize,
}

impl Octree<'_> {
    fn side(&self, level: u8) -> f64 {
        self.root / (1u64 << level) as f64
    }

    fn center(&self, (level, c): Key) -> Vec3 {
        let s = self.side(level);
        self.origin + Vec3::new(c[0] as f64 + 0.5, c[1] as f64 + 0.5, c[2] as f64 + 0.5) * s
    }

    fn target_size(&self, p: &Vec3) -> f64 {
        let h = if self.materials < 2 {
            1.0
        } else {
            heterogeneity(&self.design.root.material_fractions(p), self.materials).unwrap_or(1.0)
        };
        self.sizing.cell_size(h)
    }

    fn refine(&self, key: Key, out: &mut Vec<Key>, capped: &AtomicBool) {
        let level = key.0;
        let side = self.side(level);
        let p = self.center(key);
        let half_diag = 0.5 * side * 3f64.sqrt();
        let outside = self.design.root.sdf(&p) > half_diag;
        if outside || side <= self.target_size(&p) * (1.0 + 1e-9) {
            out.push(key);
            return;
        }
        if level >= MAX_DEPTH {
            capped.store(true, Ordering::Relaxed);
            out.push(key);
            return;
        }
        for child in children(key) {
            self.refine(child, out, capped);
        }
    }

    fn in_domain(&self, (level, c): Key) -> bool {
        (0..3).all(|a| c[a] >= 0 && c[a] < self.dims[a] << level)
    }
}

fn children((level, c): Key) -> impl Iterator<Item = Key> {
    (0..8).map(move |i| (level + 1, [2 * c[0] + (i & 1), 2 * c[1] + ((i >> 1) & 1), 2 * c[2] + ((i >> 2) & 1)]))
}

/// Splits leaves until no two leaves touching at a face, edge or corner
/// differ by more than one level. The result is the unique coarsest such
/// refinement, so it does not depend on visiting order.
fn balance(tree: &Octree, leaves: Vec<Key>) -> Vec<Key> {
    let mut set: HashSet<Key> = leaves.iter().copied().collect();
    let mut work = leaves;
    while let Some(key) = work.pop() {
        if !set.contains(&key) {
            continue;
        }
        let (level, c) = key;
        if level < 2 {
            continue;
        }
        'neighbors: for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let n = (level, [c[0] + dx, c[1] + dy, c[2] + dz]);
                    if !tree.in_domain(n) {
                        continue;
                    }
                    let Some(coarse) = (0..=level).rev().map(|m| (m, n.1.map(|v| v >> (level - m)))).find(|k| set.contains(k))
                    else {
                        continue;
                    };
                    if coarse.0 + 1 < level {
                        set.remove(&coarse);
                        for ch in children(coarse) {
                            set.insert(ch);
                            work.push(ch);
                        }
                        work.push(key);
                        break 'neighbors;
                    }
                }
            }
        }
    }
    let mut out: Vec<Key> = set.into_iter().collect();
    out.sort_unstable();
    out
}

fn add(a: IVec, b: IVec) -> IVec {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn axis(a: usize, len: i64) -> IVec {
    let mut v = [0; 3];
    v[a] = len;
    v
}

/// Triangulates the square face at `o` spanned by axes `u`, `v` with side `w`.
fn triangulate_face(o: IVec, u: usize, v: usize, w: i64, corners: &HashSet<IVec>, out: &mut Vec<[IVec; 3]>) {
    let h = w / 2;
    let center = add(o, add(axis(u, h), axis(v, h)));
    if w >= 2 && corners.contains(&center) {
        for (su, sv) in [(0, 0), (h, 0), (0, h), (h, h)] {
            triangulate_face(add(o, add(axis(u, su), axis(v, sv))), u, v, h, corners, out);
        }
        return;
    }
    let c = [o, add(o, axis(u, w)), add(o, add(axis(u, w), axis(v, w))), add(o, axis(v, w))];
    let mut ring = Vec::with_capacity(8);
    let mut has_mid = false;
    for i in 0..4 {
        ring.push(c[i]);
        if w >= 2 {
            let n = c[(i + 1) % 4];
            let m = [(c[i][0] + n[0]) / 2, (c[i][1] + n[1]) / 2, (c[i][2] + n[2]) / 2];
            if corners.contains(&m) {
                ring.push(m);
                has_mid = true;
            }
        }
    }
    if has_mid {
        for i in 0..ring.len() {
            out.push([center, ring[i], ring[(i + 1) % ring.len()]]);
        }
    } else {
        let start = (0..4).min_by_key(|&i| c[i]).unwrap();
        let [a, b, d, e] = [0, 1, 2, 3].map(|k| c[(start + k) % 4]);
        out.push([a, b, d]);
        out.push([a, d, e]);
    }
}

fn orient(t: [IVec; 4]) -> Option<[IVec; 4]> {
    let d = |p: IVec| [p[0] - t[0][0], p[1] - t[0][1], p[2] - t[0][2]].map(i128::from);
    let (b, c, e) = (d(t[1]), d(t[2]), d(t[3]));
    let det = b[0] * (c[1] * e[2] - c[2] * e[1]) - b[1] * (c[0] * e[2] - c[2] * e[0]) + b[2] * (c[0] * e[1] - c[1] * e[0]);
    match det.signum() {
        1 => Some(t),
        -1 => Some([t[0], t[2], t[1], t[3]]),
        _ => None,
    }
}

/// Adaptive tetrahedral mesh of `design` with element size following
/// `sizing` of the local heterogeneity.
pub fn export_tets(design: &Design, sizing: &SizingField, opts: &ExportOptions) -> Result<(FeaMesh, ExportReport), FeaError> {
    let bounds = design.root.bounds()?;
    let root = sizing.max_cell();
    let size = bounds.size();
    let dims = [0, 1, 2].map(|a| cell_count(size[a], root) as i64);
    let tree = Octree { design, sizing, origin: bounds.min, root, dims, materials: mixing_materials(design) };
    let roots = dims[0] as u64 * dims[1] as u64 * dims[2] as u64;
    if roots.saturating_mul(12) > opts.element_cap {
        return Err(FeaError::TooManyElements { count: roots * 12, cap: opts.element_cap });
    }

    let capped = AtomicBool::new(false);
    let root_keys: Vec<Key> =
        (0..dims[2]).flat_map(|k| (0..dims[1]).flat_map(move |j| (0..dims[0]).map(move |i| (0u8, [i, j, k])))).collect();
    let leaves: Vec<Key> = root_keys
        .par_iter()
        .flat_map_iter(|&k| {
            let mut out = Vec::new();
            tree.refine(k, &mut out, &capped);
            out
        })
        .collect();
    let capped = capped.into_inner();
    if capped {
        log::warn!("octree refinement stopped at depth {MAX_DEPTH}; min_cell {} is not reached everywhere", sizing.min_cell());
    }
    let leaves = balance(&tree, leaves);
    if (leaves.len() as u64).saturating_mul(12) > opts.element_cap {
        return Err(FeaError::TooManyElements { count: leaves.len() as u64 * 12, cap: opts.element_cap });
    }

    let depth = leaves.iter().map(|k| k.0).max().unwrap_or(0);
    let unit_shift = u32::from(depth) + 1;
    let unit = root / (1u64 << unit_shift) as f64;
    let world = |p: IVec| bounds.min + Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64) * unit;
    let leaf_geom = |(level, c): Key| {
        let w = 1i64 << (unit_shift - u32::from(level));
        (c.map(|v| v * w), w)
    };

    let mut corners = HashSet::with_capacity(leaves.len() * 2);
    for &k in &leaves {
        let (o, w) = leaf_geom(k);
        for i in 0..8 {
            corners.insert([o[0] + (i & 1) * w, o[1] + ((i >> 1) & 1) * w, o[2] + ((i >> 2) & 1) * w]);
        }
    }

    let per_leaf: Vec<(u8, Vec<[IVec; 4]>)> = leaves
        .par_iter()
        .map(|&k| {
            let (o, w) = leaf_geom(k);
            let cc = add(o, [w / 2; 3]);
            let mut tris = Vec::new();
            for a in 0..3 {
                let (u, v) = ((a + 1) % 3, (a + 2) % 3);
                for s in [0, w] {
                    triangulate_face(add(o, axis(a, s)), u, v, w, &corners, &mut tris);
                }
            }
            let tets = tris
                .into_iter()
                .filter_map(|t| orient([cc, t[0], t[1], t[2]]))
                .filter(|t| {
                    let centroid = (world(t[0]) + world(t[1]) + world(t[2]) + world(t[3])) / 4.0;
                    design.root.sdf(&centroid) <= 0.0
                })
                .collect();
            (k.0, tets)
        })
        .collect();

    let mut index: HashMap<IVec, u32> = HashMap::new();
    let mut nodes = Vec::new();
    let mut connectivity = Vec::new();
    let mut tet_side = Vec::new();
    for (level, tets) in &per_leaf {
        for t in tets {
            for p in t {
                let id = *index.entry(*p).or_insert_with(|| {
                    nodes.push(world(*p));
                    (nodes.len() - 1) as u32
                });
                connectivity.push(id);
            }
            tet_side.push(tree.side(*level));
        }
    }
    if tet_side.len() as u64 > opts.element_cap {
        return Err(FeaError::TooManyElements { count: tet_side.len() as u64, cap: opts.element_cap });
    }

    let mut report = ExportReport { leaves: leaves.len(), depth_capped: capped, ..ExportReport::default() };
    snap_boundary(design, &mut nodes, &connectivity, &tet_side, &mut report);

    let mut kept_conn = Vec::with_capacity(connectivity.len());
    for (t, side) in connectivity.chunks_exact(4).zip(&tet_side) {
        let v = tet_volume(&nodes[t[0] as usize], &nodes[t[1] as usize], &nodes[t[2] as usize], &nodes[t[3] as usize]);
        if v > 1e-12 * side * side * side {
            kept_conn.extend_from_slice(t);
        } else {
            report.discarded += 1;
        }
    }
    if report.discarded > 0 {
        log::info!("discarded {} degenerate tets", report.discarded);
    }
    let (nodes, connectivity) = compact(nodes, kept_conn);

    let fallback = design.root.fraction_materials().into_iter().next().unwrap_or(MaterialId(0));
    let assigned: Vec<Option<MaterialId>> = connectivity
        .par_chunks_exact(4)
        .enumerate()
        .map(|(e, t)| {
            let c = t.iter().map(|&n| nodes[n as usize]).sum::<Vec3>() / 4.0;
            assign_material(&design.root.material_fractions(&c), [e as u64, 0, 0], opts.seed, opts.mode)
        })
        .collect();
    report.unassigned = assigned.iter().filter(|m| m.is_none()).count();
    let materials = assigned.into_iter().map(|m| m.unwrap_or(fallback)).collect();
    let mesh = FeaMesh { kind: ElementType::C3D4, nodes, connectivity, materials };
    report.elements = mesh.len();
    report.nodes = mesh.nodes.len();
    report.sizing_clamped = sizing.clamped_count();
    Ok((mesh, report))
}

/// One Newton step onto the zero level set for every boundary vertex within
/// a leaf diagonal of it, processed in index order.
fn snap_boundary(design: &Design, nodes: &mut [Vec3], conn: &[u32], tet_side: &[f64], report: &mut ExportReport) {
    const FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];
    let mut face_use: HashMap<[u32; 3], u32> = HashMap::new();
    for t in conn.chunks_exact(4) {
        for f in FACES {
            let mut k = f.map(|i| t[i]);
            k.sort_unstable();
            *face_use.entry(k).or_default() += 1;
        }
    }
    let mut on_boundary = vec![false; nodes.len()];
    for (f, n) in &face_use {
        if *n == 1 {
            f.iter().for_each(|&v| on_boundary[v as usize] = true);
        }
    }
    let mut incident: Vec<Vec<u32>> = vec![Vec::new(); nodes.len()];
    for (t, tet) in conn.chunks_exact(4).enumerate() {
        tet.iter().for_each(|&v| incident[v as usize].push(t as u32));
    }
    let volume = |nodes: &[Vec3], t: usize| {
        let c = &conn[4 * t..4 * t + 4];
        tet_volume(&nodes[c[0] as usize], &nodes[c[1] as usize], &nodes[c[2] as usize], &nodes[c[3] as usize])
    };
    let original: Vec<f64> = (0..tet_side.len()).map(|t| volume(nodes, t)).collect();

    for v in 0..nodes.len() {
        if !on_boundary[v] {
            continue;
        }
        let side = incident[v].iter().map(|&t| tet_side[t as usize]).fold(f64::INFINITY, f64::min);
        let p = nodes[v];
        let d = design.root.sdf(&p);
        if d == 0.0 || d.abs() > side * 3f64.sqrt() {
            continue;
        }
        let g = design.root.sdf_gradient(&p, 1e-4 * side);
        let g2 = g.norm_squared();
        if !(g2 > 1e-12) {
            continue;
        }
        nodes[v] = p - g * (d / g2);
        if incident[v].iter().all(|&t| volume(nodes, t as usize) >= MIN_SNAP_RATIO * original[t as usize]) {
            report.snapped += 1;
        } else {
            nodes[v] = p;
            report.reverted += 1;
        }
    }
}

/// Drops nodes no element references, keeping first-use order.
fn compact(nodes: Vec<Vec3>, conn: Vec<u32>) -> (Vec<Vec3>, Vec<u32>) {
    let mut remap = vec![u32::MAX; nodes.len()];
    let mut out_nodes = Vec::new();
    let conn = conn
        .into_iter()
        .map(|n| {
            if remap[n as usize] == u32::MAX {
                remap[n as usize] = out_nodes.len() as u32;
                out_nodes.push(nodes[n as usize]);
            }
            remap[n as usize]
        })
        .collect();
    (out_nodes, conn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fea::check_mesh;
    use crate::material::MaterialTable;

    fn cube(side: f64) -> Design {
        let t = MaterialTable::default_materials();
        let red = t.id("red").unwrap();
        Design::new(t, crate::design::DesignNode::rect_prism(Vec3::zeros(), Vec3::repeat(side), red).unwrap())
    }

    #[test]
    fn homogeneous_cube_stays_at_max_cell() {
        let d = cube(8.0);
        let s = SizingField::new(0.5, 2.0).unwrap();
        let (mesh, report) = export_tets(&d, &s, &ExportOptions::default()).unwrap();
        assert_eq!(report.leaves, 64);
        assert_eq!(mesh.len(), 64 * 12);
        assert_eq!(check_mesh(&mesh), vec![]);
        assert!((mesh.total_volume() - 512.0).abs() < 1e-9);
    }

    #[test]
    fn balance_splits_coarse_neighbors() {
        let d = cube(8.0);
        let s = SizingField::new(0.5, 2.0).unwrap();
        let tree = Octree { design: &d, sizing: &s, origin: Vec3::repeat(-4.0), root: 2.0, dims: [4, 4, 4], materials: 1 };
        // a level-3 leaf in the +x corner of root cell 0 touches root cell 1
        let mut set: HashSet<Key> = (0..4).flat_map(|k| (0..4).flat_map(move |j| (0..4).map(move |i| (0u8, [i, j, k])))).collect();
        for key in [(0u8, [0i64, 0, 0]), (1, [1, 0, 0]), (2, [3, 0, 0])] {
            set.remove(&key);
            set.extend(children(key));
        }
        let leaves: Vec<Key> = set.into_iter().collect();
        let before = leaves.len();
        let out = balance(&tree, leaves);
        for &(l, c) in &out {
            for &(m, e) in &out {
                let touch = (0..3).all(|a| {
                    let (lo1, hi1) = ((c[a] as f64) / (1 << l) as f64, (c[a] + 1) as f64 / (1 << l) as f64);
                    let (lo2, hi2) = ((e[a] as f64) / (1 << m) as f64, (e[a] + 1) as f64 / (1 << m) as f64);
                    lo1 <= hi2 && lo2 <= hi1
                });
                if touch {
                    assert!(l.abs_diff(m) <= 1, "{:?} {:?}", (l, c), (m, e));
                }
            }
        }
        assert!(out.len() > before);
        let vol: f64 = out.iter().map(|&(l, _)| 1.0 / (8f64).powi(l as i32)).sum();
        assert!((vol - 64.0).abs() < 1e-12);
    }
}
