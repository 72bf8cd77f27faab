//! Linear tetrahedral meshes: orientation repair, barycentric coordinates,
//! boundary extraction and hierarchical point location.

use std::collections::HashMap;

use crate::bvh::Bvh;
use crate::geom::{BBox, Vec3};
use crate::inp::{ElementType, InpMesh};
use crate::surface::TriangleMesh;

use super::SimFieldError;

/// Tets whose volume falls below this are rejected, mm³.
pub const MIN_TET_VOLUME: f64 = 1e-15;

/// Barycentric slack accepted as "inside".
pub const CONTAINMENT_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct TetMesh {
    node_ids: Vec<u64>,
    positions: Vec<Vec3>,
    element_ids: Vec<u64>,
    tets: Vec<[u32; 4]>,
    reoriented: usize,
}

/// Six times the signed volume of `abcd`.
#[inline]
fn det6(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).dot(&(c - a).cross(&(d - a)))
}

/// Barycentric coordinates of `p` in the tet `v`.
///
/// The last coordinate is `1 − (λ₁+λ₂+λ₃)` so the sum is exact up to one
/// rounding.
pub fn barycentric(v: &[Vec3; 4], p: &Vec3) -> [f64; 4] {
    let vol = det6(&v[0], &v[1], &v[2], &v[3]);
    let l1 = det6(&v[0], p, &v[2], &v[3]) / vol;
    let l2 = det6(&v[0], &v[1], p, &v[3]) / vol;
    let l3 = det6(&v[0], &v[1], &v[2], p) / vol;
    [1.0 - (l1 + l2 + l3), l1, l2, l3]
}

impl TetMesh {
    /// Builds a mesh from node ids, positions and 0-based tet corner
    /// indices, flipping negatively oriented tets.
    pub fn new(node_ids: Vec<u64>, positions: Vec<Vec3>, element_ids: Vec<u64>, mut tets: Vec<[u32; 4]>) -> Result<Self, SimFieldError> {
        let mut reoriented = 0;
        for (k, t) in tets.iter_mut().enumerate() {
            if let Some(&bad) = t.iter().find(|&&i| i as usize >= positions.len()) {
                return Err(SimFieldError::Mesh(format!("element {} references node index {bad} out of range", element_ids[k])));
            }
            let p = t.map(|i| positions[i as usize]);
            let v = det6(&p[0], &p[1], &p[2], &p[3]) / 6.0;
            if v.abs() < MIN_TET_VOLUME || !v.is_finite() {
                return Err(SimFieldError::DegenerateTet { element: element_ids[k], volume: v.abs() });
            }
            if v < 0.0 {
                t.swap(2, 3);
                reoriented += 1;
            }
        }
        if reoriented > 0 {
            log::info!("reoriented {reoriented} inverted tetrahedra");
        }
        Ok(TetMesh { node_ids, positions, element_ids, tets, reoriented })
    }

    /// Converts the C3D4 elements of a parsed INP file.
    pub fn from_inp(inp: &InpMesh) -> Result<Self, SimFieldError> {
        if let Some(e) = inp.elements.iter().find(|e| e.kind != ElementType::C3D4) {
            return Err(SimFieldError::Mesh(format!(
                "element {} is {}; simulation fields need C3D4 tetrahedra",
                e.id,
                e.kind.name()
            )));
        }
        let index: HashMap<u64, u32> = inp.nodes.iter().enumerate().map(|(i, n)| (n.id, i as u32)).collect();
        let tets = inp.elements.iter().map(|e| std::array::from_fn(|k| index[&e.nodes[k]])).collect();
        TetMesh::new(
            inp.nodes.iter().map(|n| n.id).collect(),
            inp.nodes.iter().map(|n| n.position).collect(),
            inp.elements.iter().map(|e| e.id).collect(),
            tets,
        )
    }

    pub fn node_ids(&self) -> &[u64] {
        &self.node_ids
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn element_ids(&self) -> &[u64] {
        &self.element_ids
    }

    pub fn tets(&self) -> &[[u32; 4]] {
        &self.tets
    }

    pub fn len(&self) -> usize {
        self.tets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tets.is_empty()
    }

    /// Number of tets flipped to positive orientation at construction.
    pub fn reoriented(&self) -> usize {
        self.reoriented
    }

    #[inline]
    pub fn corners(&self, t: usize) -> [Vec3; 4] {
        self.tets[t].map(|i| self.positions[i as usize])
    }

    pub fn volume(&self, t: usize) -> f64 {
        let p = self.corners(t);
        det6(&p[0], &p[1], &p[2], &p[3]) / 6.0
    }

    pub fn centroid(&self, t: usize) -> Vec3 {
        self.corners(t).iter().sum::<Vec3>() / 4.0
    }

    pub fn bounds(&self) -> BBox {
        BBox::from_points(&self.positions)
    }

    /// Faces used by exactly one tet, wound so their normals point away from
    /// the owning tet.
    pub fn extract_boundary(&self) -> TriangleMesh {
        // opposite-vertex face order keeps positive tets outward-facing
        const FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];
        let mut count: HashMap<[u32; 3], (u32, [u32; 3])> = HashMap::new();
        let mut order = Vec::new();
        for t in &self.tets {
            for f in FACES {
                let tri = f.map(|k| t[k]);
                let mut key = tri;
                key.sort_unstable();
                let e = count.entry(key).or_insert_with(|| {
                    order.push(key);
                    (0, tri)
                });
                e.0 += 1;
            }
        }
        let mut used = vec![u32::MAX; self.positions.len()];
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for key in order {
            let (n, tri) = count[&key];
            if n != 1 {
                continue;
            }
            triangles.push(tri.map(|i| {
                if used[i as usize] == u32::MAX {
                    used[i as usize] = vertices.len() as u32;
                    vertices.push(self.positions[i as usize]);
                }
                used[i as usize]
            }));
        }
        TriangleMesh::new(vertices, triangles)
    }
}

/// Bounding-box hierarchy over the tets of a mesh.
#[derive(Debug, Clone)]
pub struct AabbTree {
    bvh: Bvh,
    slack: f64,
}

impl AabbTree {
    pub fn build(mesh: &TetMesh) -> Self {
        let boxes: Vec<BBox> = (0..mesh.len()).map(|t| BBox::from_points(&mesh.corners(t))).collect();
        let bvh = Bvh::build(&boxes);
        let slack = 1e-6 * bvh.bounds().size().norm().max(1.0);
        AabbTree { bvh, slack }
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    /// Lowest-index tet containing `p`, or `None` outside the mesh.
    pub fn locate(&self, mesh: &TetMesh, p: &Vec3) -> Option<usize> {
        let mut best: Option<usize> = None;
        self.bvh.for_each_near(p, self.slack, |t| {
            if best.is_some_and(|b| b < t) {
                return;
            }
            if contains(mesh, t, p) {
                best = Some(t);
            }
        });
        best
    }

    /// The tet whose worst barycentric coordinate at `p` is largest, among
    /// tets whose boxes lie within `reach` of `p`. Used just outside the mesh
    /// where the distance grid still reports the interior.
    pub fn nearest(&self, mesh: &TetMesh, p: &Vec3, reach: f64) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        self.bvh.for_each_near(p, reach, |t| {
            let lo = barycentric(&mesh.corners(t), p).into_iter().fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(bl, bt)| lo > bl || (lo == bl && t < bt)) {
                best = Some((lo, t));
            }
        });
        best.map(|(_, t)| t)
    }
}

/// Containment test shared by the tree and the brute-force scan.
#[inline]
pub fn contains(mesh: &TetMesh, t: usize, p: &Vec3) -> bool {
    barycentric(&mesh.corners(t), p).iter().all(|&l| l >= -CONTAINMENT_EPS)
}

/// Reference point location by scanning every tet.
pub fn locate_brute_force(mesh: &TetMesh, p: &Vec3) -> Option<usize> {
    (0..mesh.len()).find(|&t| contains(mesh, t, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::vec3;

    fn unit_tet() -> TetMesh {
        let p = vec![vec3(0.0, 0.0, 0.0), vec3(1.0, 0.0, 0.0), vec3(0.0, 1.0, 0.0), vec3(0.0, 0.0, 1.0)];
        TetMesh::new(vec![1, 2, 3, 4], p, vec![1], vec![[0, 1, 2, 3]]).unwrap()
    }

    #[test]
    fn barycentric_special_points() {
        let m = unit_tet();
        let v = m.corners(0);
        for i in 0..4 {
            let l = barycentric(&v, &v[i]);
            for (j, lj) in l.iter().enumerate() {
                assert!((lj - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        let c = barycentric(&v, &m.centroid(0));
        assert!(c.iter().all(|l| (l - 0.25).abs() < 1e-15));
        let mid = barycentric(&v, &((v[1] + v[2]) / 2.0));
        assert!((mid[1] - 0.5).abs() < 1e-15 && (mid[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn orientation_repair_and_degenerate() {
        let p = vec![vec3(0.0, 0.0, 0.0), vec3(1.0, 0.0, 0.0), vec3(0.0, 1.0, 0.0), vec3(0.0, 0.0, 1.0)];
        let m = TetMesh::new(vec![1, 2, 3, 4], p.clone(), vec![1], vec![[0, 2, 1, 3]]).unwrap();
        assert_eq!(m.reoriented(), 1);
        assert!(m.volume(0) > 0.0);
        let flat = vec![p[0], p[1], p[2], vec3(1.0, 1.0, 0.0)];
        assert!(matches!(
            TetMesh::new(vec![1, 2, 3, 4], flat, vec![7], vec![[0, 1, 2, 3]]),
            Err(SimFieldError::DegenerateTet { element: 7, .. })
        ));
    }

    #[test]
    fn boundary_counts() {
        let m = unit_tet();
        let b = m.extract_boundary();
        assert_eq!(b.len(), 4);
        assert!(b.is_closed_manifold());
        assert!(b.volume() > 0.0);

        let p = vec![vec3(0.0, 0.0, 0.0), vec3(1.0, 0.0, 0.0), vec3(0.0, 1.0, 0.0), vec3(0.0, 0.0, 1.0), vec3(1.0, 1.0, 1.0)];
        let two = TetMesh::new(vec![1, 2, 3, 4, 5], p, vec![1, 2], vec![[0, 1, 2, 3], [1, 2, 3, 4]]).unwrap();
        assert_eq!(two.extract_boundary().len(), 6);
    }

    #[test]
    fn locate_centroid_and_far_point() {
        let m = unit_tet();
        let tree = AabbTree::build(&m);
        assert_eq!(tree.locate(&m, &m.centroid(0)), Some(0));
        assert_eq!(tree.locate(&m, &vec3(1000.0, 0.0, 0.0)), None);
    }
}
