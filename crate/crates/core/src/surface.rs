//! Indexed triangle surfaces: binary/ASCII STL I/O, topology checks, and
//! exact signed distance queries.
//!
//! Signs come from angle-weighted pseudonormals at the closest feature, which
//! is exact for closed, consistently oriented meshes. Open or non-manifold
//! input falls back to the generalized winding number.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io;
use std::path::Path;

use crate::bvh::Bvh;
use crate::geom::{BBox, Vec3};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

#[derive(Debug, thiserror::Error)]
pub enum StlError {
    #[error("STL data is truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("ASCII STL line {line}: {message}")]
    Ascii { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        TriangleMesh { vertices, triangles }
    }

    /// Builds an indexed mesh from loose triangles, welding bit-identical
    /// vertices.
    pub fn from_soup(soup: impl IntoIterator<Item = [Vec3; 3]>) -> Self {
        let mut index: HashMap<[u64; 3], u32> = HashMap::new();
        let mut mesh = TriangleMesh::default();
        for tri in soup {
            let mut t = [0u32; 3];
            for (k, v) in tri.iter().enumerate() {
                // +0.0 and -0.0 weld together
                let key = [(v.x + 0.0).to_bits(), (v.y + 0.0).to_bits(), (v.z + 0.0).to_bits()];
                t[k] = *index.entry(key).or_insert_with(|| {
                    mesh.vertices.push(*v);
                    (mesh.vertices.len() - 1) as u32
                });
            }
            mesh.triangles.push(t);
        }
        mesh
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn bounds(&self) -> BBox {
        BBox::from_points(self.triangles.iter().flatten().map(|&i| &self.vertices[i as usize]))
    }

    #[inline]
    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Non-normalized normal, length twice the area.
    pub fn area_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a))
    }

    pub fn area(&self) -> f64 {
        (0..self.len()).map(|t| 0.5 * self.area_normal(t).norm()).sum()
    }

    /// Signed enclosed volume; positive for outward-oriented closed meshes.
    pub fn volume(&self) -> f64 {
        (0..self.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Use count of each undirected edge, keyed by (low, high) vertex index.
    pub fn edge_use_counts(&self) -> HashMap<(u32, u32), usize> {
        let mut m = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *m.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        m
    }

    /// Every edge shared by exactly two triangles that traverse it in
    /// opposite directions.
    pub fn is_closed_manifold(&self) -> bool {
        if self.is_empty() {
            return false;
        }
        let mut directed: HashMap<(u32, u32), i32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if a == b {
                    return false;
                }
                let e = directed.entry((a.min(b), a.max(b))).or_insert(0);
                *e += if a < b { 1 } else { 1 << 8 };
            }
        }
        directed.values().all(|&v| v == 1 + (1 << 8))
    }

    /// V − E + F over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for &i in self.triangles.iter().flatten() {
            used[i as usize] = true;
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edge_use_counts().len() as i64 + self.len() as i64
    }

    /// Generalized winding number: 1 inside a closed outward mesh, 0 outside.
    pub fn winding_number(&self, p: &Vec3) -> f64 {
        let mut total = 0.0;
        for t in 0..self.len() {
            let [a, b, c] = self.corners(t);
            total += solid_angle(&(a - p), &(b - p), &(c - p));
        }
        total / (4.0 * PI)
    }

    pub fn to_stl_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(84 + 50 * self.len());
        let mut header = [0u8; 80];
        let tag = b"binary STL";
        header[..tag.len()].copy_from_slice(tag);
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for t in 0..self.len() {
            let n = self.area_normal(t).try_normalize(0.0).unwrap_or_else(Vec3::zeros);
            for v in std::iter::once(n).chain(self.corners(t)) {
                for c in v.iter() {
                    out.extend_from_slice(&(*c as f32).to_le_bytes());
                }
            }
            out.extend_from_slice(&0u16.to_le_bytes());
        }
        out
    }

    pub fn write_stl(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_stl_bytes())
    }

    /// Reads binary or ASCII STL and welds identical vertices.
    pub fn from_stl_bytes(bytes: &[u8]) -> Result<Self, StlError> {
        if bytes.len() >= 84 {
            let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
            if 84 + 50 * n == bytes.len() {
                return Ok(parse_binary(bytes, n));
            }
        }
        let trimmed = bytes.iter().skip_while(|b| b.is_ascii_whitespace()).take(5).copied().collect::<Vec<u8>>();
        if trimmed.eq_ignore_ascii_case(b"solid") {
            return parse_ascii(bytes);
        }
        let n = if bytes.len() >= 84 { u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize } else { 0 };
        Err(StlError::Truncated { expected: 84 + 50 * n, found: bytes.len() })
    }

    pub fn read_stl(path: &Path) -> Result<Self, StlError> {
        TriangleMesh::from_stl_bytes(&std::fs::read(path)?)
    }
}

fn parse_binary(bytes: &[u8], n: usize) -> TriangleMesh {
    let f = |off: usize| f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as f64;
    TriangleMesh::from_soup((0..n).map(|t| {
        let base = 84 + 50 * t + 12;
        let v = |k: usize| Vec3::new(f(base + 12 * k), f(base + 12 * k + 4), f(base + 12 * k + 8));
        [v(0), v(1), v(2)]
    }))
}

fn parse_ascii(bytes: &[u8]) -> Result<TriangleMesh, StlError> {
    let text = String::from_utf8_lossy(bytes);
    let mut soup = Vec::new();
    let mut pending: Vec<Vec3> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("vertex") => {
                let coords: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
                match coords {
                    Ok(c) if c.len() == 3 => pending.push(Vec3::new(c[0], c[1], c[2])),
                    _ => return Err(StlError::Ascii { line: i + 1, message: "bad vertex".into() }),
                }
            }
            Some("endloop") => {
                if pending.len() != 3 {
                    return Err(StlError::Ascii { line: i + 1, message: format!("facet has {} vertices", pending.len()) });
                }
                soup.push([pending[0], pending[1], pending[2]]);
                pending.clear();
            }
            _ => {}
        }
    }
    Ok(TriangleMesh::from_soup(soup))
}

/// Signed solid angle of the triangle seen from the origin.
fn solid_angle(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let num = a.dot(&b.cross(c));
    let den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    2.0 * num.atan2(den)
}

/// Which part of a triangle a closest point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Face,
    /// Edge `k` runs from corner `k` to corner `(k + 1) % 3`.
    Edge(u8),
    Vertex(u8),
}

/// Closest point on triangle `abc` to `p`, with the feature it lies on.
pub fn closest_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, Feature) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, Feature::Vertex(0));
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, Feature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, Feature::Edge(0));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, Feature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, Feature::Edge(2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, Feature::Edge(1));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, Feature::Face)
}

/// Exact signed distance to a triangle mesh.
pub struct SignedDistance<'a> {
    mesh: &'a TriangleMesh,
    bvh: Bvh,
    face_normals: Vec<Vec3>,
    edge_normals: Vec<[Vec3; 3]>,
    vertex_normals: Vec<Vec3>,
    closed: bool,
}

impl<'a> SignedDistance<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Self {
        let boxes: Vec<BBox> = (0..mesh.len()).map(|t| BBox::from_points(&mesh.corners(t))).collect();
        let bvh = Bvh::build(&boxes);
        let face_normals: Vec<Vec3> =
            (0..mesh.len()).map(|t| mesh.area_normal(t).try_normalize(0.0).unwrap_or_else(Vec3::zeros)).collect();

        let mut vertex_normals = vec![Vec3::zeros(); mesh.vertices.len()];
        let mut edge_sum: HashMap<(u32, u32), Vec3> = HashMap::new();
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let p = mesh.corners(t);
            let n = face_normals[t];
            for k in 0..3 {
                let e1 = p[(k + 1) % 3] - p[k];
                let e2 = p[(k + 2) % 3] - p[k];
                let angle = match (e1.try_normalize(0.0), e2.try_normalize(0.0)) {
                    (Some(u), Some(v)) => u.dot(&v).clamp(-1.0, 1.0).acos(),
                    _ => 0.0,
                };
                vertex_normals[tri[k] as usize] += n * angle;
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edge_sum.entry((a.min(b), a.max(b))).or_insert_with(Vec3::zeros) += n;
            }
        }
        let edge_normals = mesh
            .triangles
            .iter()
            .map(|tri| {
                std::array::from_fn(|k| {
                    let (a, b) = (tri[k], tri[(k + 1) % 3]);
                    edge_sum[&(a.min(b), a.max(b))]
                })
            })
            .collect();
        SignedDistance { mesh, bvh, face_normals, edge_normals, vertex_normals, closed: mesh.is_closed_manifold() }
    }

    /// Distance to the closest triangle, its index, the closest point and
    /// the feature it lies on.
    pub fn unsigned(&self, p: &Vec3) -> Option<(f64, usize, Vec3, Feature)> {
        let (d, t) = self.bvh.nearest(p, 0.0, |t| {
            let [a, b, c] = self.mesh.corners(t);
            (p - closest_on_triangle(p, &a, &b, &c).0).norm()
        })?;
        let [a, b, c] = self.mesh.corners(t);
        let (q, f) = closest_on_triangle(p, &a, &b, &c);
        Some((d, t, q, f))
    }

    /// Negative inside. Empty meshes report `+inf`.
    pub fn signed(&self, p: &Vec3) -> f64 {
        let Some((d, t, q, feature)) = self.unsigned(p) else {
            return f64::INFINITY;
        };
        if d == 0.0 {
            return 0.0;
        }
        let inside = if self.closed {
            let n = match feature {
                Feature::Face => self.face_normals[t],
                Feature::Edge(k) => self.edge_normals[t][k as usize],
                Feature::Vertex(k) => self.vertex_normals[self.mesh.triangles[t][k as usize] as usize],
            };
            let s = (p - q).dot(&n);
            if s == 0.0 || !s.is_finite() {
                self.mesh.winding_number(p) > 0.5
            } else {
                s < 0.0
            }
        } else {
            self.mesh.winding_number(p) > 0.5
        };
        if inside {
            -d
        } else {
            d
        }
    }
}
