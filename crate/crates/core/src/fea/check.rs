//! Structural checks for exported meshes.

use std::collections::HashMap;

use smallvec::SmallVec;

use super::FeaMesh;
use crate::geom::{BBox, Vec3};
use crate::inp::ElementType;
use crate::surface::closest_on_triangle;

#[derive(Debug, Clone, PartialEq)]
pub enum MeshDefect {
    BadIndex { element: usize },
    OrphanNode(usize),
    NonPositiveVolume { element: usize, volume: f64 },
    /// A face used by more than two elements, or twice with the same orientation.
    FaceMismatch { nodes: Vec<u32> },
    /// Boundary faces do not close up.
    OpenBoundary { edge: (u32, u32) },
    /// A node lies on an unshared face without being one of its corners.
    HangingNode { node: u32, face: Vec<u32> },
    MaterialCount { elements: usize, materials: usize },
}

const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];
const HEX_FACES: [[usize; 4]; 6] = [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4], [1, 2, 6, 5], [2, 3, 7, 6], [3, 0, 4, 7]];

type Face = SmallVec<[u32; 4]>;

/// Rotation of `f` starting at its smallest index, keeping the winding.
fn canonical(f: &[u32]) -> Face {
    let start = (0..f.len()).min_by_key(|&i| f[i]).unwrap();
    (0..f.len()).map(|i| f[(start + i) % f.len()]).collect()
}

fn reversed(f: &[u32]) -> Face {
    let r: Face = f.iter().rev().copied().collect();
    canonical(&r)
}

/// Returns every defect found; an empty list means the mesh is conforming,
/// positively oriented, free of orphan nodes and closed on its boundary.
pub fn check_mesh(mesh: &FeaMesh) -> Vec<MeshDefect> {
    let mut defects = Vec::new();
    let k = mesh.kind.node_count();
    if mesh.connectivity.len() != k * mesh.materials.len() {
        defects.push(MeshDefect::MaterialCount { elements: mesh.connectivity.len() / k, materials: mesh.materials.len() });
        return defects;
    }
    let mut used = vec![false; mesh.nodes.len()];
    for e in 0..mesh.len() {
        let el = mesh.element(e);
        if el.iter().any(|&n| n as usize >= mesh.nodes.len()) {
            defects.push(MeshDefect::BadIndex { element: e });
            continue;
        }
        el.iter().for_each(|&n| used[n as usize] = true);
        let v = mesh.volume(e);
        if !(v > 0.0) {
            defects.push(MeshDefect::NonPositiveVolume { element: e, volume: v });
        }
    }
    if !defects.is_empty() {
        return defects;
    }
    defects.extend(used.iter().enumerate().filter(|(_, u)| !**u).map(|(i, _)| MeshDefect::OrphanNode(i)));

    let mut faces: HashMap<Face, (Face, usize)> = HashMap::new();
    let mut add = |f: Face| {
        let mut key = f.clone();
        key.sort_unstable();
        faces.entry(key).and_modify(|(_, c)| *c += 1).or_insert((canonical(&f), 1)).clone()
    };
    let mut mismatched = Vec::new();
    for e in 0..mesh.len() {
        let el = mesh.element(e);
        let local: Vec<Face> = match mesh.kind {
            ElementType::C3D4 => TET_FACES.iter().map(|f| f.iter().map(|&i| el[i]).collect()).collect(),
            ElementType::C3D8R => HEX_FACES.iter().map(|f| f.iter().map(|&i| el[i]).collect()).collect(),
        };
        for f in local {
            let (first, count) = add(f.clone());
            if count > 2 || (count == 2 && first != reversed(&f)) {
                mismatched.push(f);
            }
        }
    }
    defects.extend(mismatched.into_iter().map(|f| MeshDefect::FaceMismatch { nodes: f.to_vec() }));

    let mut balance: HashMap<(u32, u32), i64> = HashMap::new();
    for (f, count) in faces.values() {
        if *count != 1 {
            continue;
        }
        for i in 0..f.len() {
            let (a, b) = (f[i], f[(i + 1) % f.len()]);
            *balance.entry((a.min(b), a.max(b))).or_default() += if a < b { 1 } else { -1 };
        }
    }
    let mut open: Vec<(u32, u32)> = balance.into_iter().filter(|(_, b)| *b != 0).map(|(e, _)| e).collect();
    open.sort_unstable();
    defects.extend(open.into_iter().map(|edge| MeshDefect::OpenBoundary { edge }));

    let mut boundary: Vec<&Face> = faces.values().filter(|(_, c)| *c == 1).map(|(f, _)| f).collect();
    boundary.sort_unstable();
    defects.extend(hanging_nodes(mesh, &boundary, &used));
    defects
}

/// Nodes sitting on an unshared face they are not a corner of. A conforming
/// mesh has none: such a face would be matched by a split face on the other
/// side.
fn hanging_nodes(mesh: &FeaMesh, boundary: &[&Face], used: &[bool]) -> Vec<MeshDefect> {
    if boundary.is_empty() {
        return Vec::new();
    }
    let bounds = BBox::from_points(&mesh.nodes);
    let diag = bounds.size().norm().max(f64::MIN_POSITIVE);
    let mean_edge = boundary
        .iter()
        .map(|f| (mesh.nodes[f[0] as usize] - mesh.nodes[f[1] as usize]).norm())
        .sum::<f64>()
        / boundary.len() as f64;
    let cell = mean_edge.max(1e-9 * diag);
    let key = |p: &Vec3| [0, 1, 2].map(|a| ((p[a] - bounds.min[a]) / cell).floor() as i64);
    let mut grid: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    for (i, p) in mesh.nodes.iter().enumerate().filter(|(i, _)| used[*i]) {
        grid.entry(key(p)).or_default().push(i as u32);
    }
    let tol = 1e-9 * diag;
    let mut out = Vec::new();
    for f in boundary {
        let pts: Face = (*f).clone();
        let corners: Vec<Vec3> = pts.iter().map(|&n| mesh.nodes[n as usize]).collect();
        let fb = BBox::from_points(&corners).expanded(tol);
        let (lo, hi) = (key(&fb.min), key(&fb.max));
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    let Some(cands) = grid.get(&[x, y, z]) else { continue };
                    for &n in cands {
                        if pts.contains(&n) {
                            continue;
                        }
                        let p = mesh.nodes[n as usize];
                        let on = (1..corners.len() - 1).any(|i| {
                            let (q, _) = closest_on_triangle(&p, &corners[0], &corners[i], &corners[i + 1]);
                            (q - p).norm() <= tol
                        });
                        if on {
                            out.push(MeshDefect::HangingNode { node: n, face: pts.to_vec() });
                        }
                    }
                }
            }
        }
    }
    out
}
