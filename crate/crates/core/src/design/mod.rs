//! Design graphs: trees of implicit nodes answering two queries at any point,
//! a signed distance (mm, negative inside) and a set of material volume
//! fractions.
//!
//! Nodes are immutable once built. Every query is a pure function of the
//! point, so a single tree may be sampled from any number of threads.

mod json;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::{Matrix3, Matrix4};
use thiserror::Error;

use crate::expr::ExprError;
use crate::fractions::FractionSet;
use crate::geom::{BBox, Vec3};
use crate::grading::Grading;
use crate::lattice::{GraphLattice, Strut};
use crate::material::{MaterialError, MaterialId, MaterialTable};
use crate::narrowband::NarrowBandGrid;
use crate::simfield::{SimFieldError, SimulationField};
use crate::surface::TriangleMesh;

pub use json::SCHEMA_VERSION;

/// Blend width of the smooth union/intersection, mm.
pub const SMOOTH_K: f64 = 1.0;

/// Variables visible to `FGrade` expressions (local coordinates, mm).
pub const FGRADE_VARS: &[&str] = &["x", "y", "z"];

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("{expressions} expressions but {materials} materials")]
    GradeArity { expressions: usize, materials: usize },
    #[error("expression {index}: {source}")]
    Expr { index: usize, source: ExprError },
    #[error("expression {index} uses unbound variable '{name}' (available: {})", allowed.join(", "))]
    UnboundVariable { index: usize, name: String, allowed: Vec<String> },
    #[error("transform matrix is not invertible")]
    NonInvertibleTransform,
    #[error("transform matrix is not affine (last row must be 0 0 0 1)")]
    NotAffine,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unbounded design: a Tile needs an enclosing Intersection with a bounded partner")]
    Unbounded,
    #[error("design has no bounded leaf")]
    EmptyDesign,
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    SimField(#[from] SimFieldError),
    #[error("{path}: {message}")]
    Json { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl DesignError {
    pub(crate) fn at(self, path: &str) -> DesignError {
        match self {
            DesignError::Json { .. } => self,
            other => DesignError::Json { path: path.to_string(), message: other.to_string() },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
    pub material: MaterialId,
}

/// Axis-aligned box given by its center and full edge lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct RectPrism {
    pub center: Vec3,
    pub dims: Vec3,
    pub material: MaterialId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Combine {
    pub children: Vec<DesignNode>,
    /// Quadratic smooth blend of width [`SMOOTH_K`] instead of exact min/max.
    pub smooth: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Difference {
    pub a: Box<DesignNode>,
    pub b: Box<DesignNode>,
}

/// Affine placement of a child.
///
/// Distances are scaled by the smallest singular value of the linear part,
/// which is exact for rigid motions and uniform scales and a conservative
/// lower bound otherwise.
#[derive(Debug, Clone)]
pub struct Transform {
    matrix: Matrix4<f64>,
    inverse: Matrix4<f64>,
    distance_scale: f64,
    child: Box<DesignNode>,
}

impl PartialEq for Transform {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix && self.child == other.child
    }
}

impl Transform {
    pub fn new(matrix: Matrix4<f64>, child: DesignNode) -> Result<Self, DesignError> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(DesignError::InvalidParameter("transform matrix has non-finite entries".into()));
        }
        let last = matrix.row(3);
        if last[0] != 0.0 || last[1] != 0.0 || last[2] != 0.0 || last[3] != 1.0 {
            return Err(DesignError::NotAffine);
        }
        let linear: Matrix3<f64> = matrix.fixed_view::<3, 3>(0, 0).into_owned();
        if linear.determinant().abs() < 1e-12 {
            return Err(DesignError::NonInvertibleTransform);
        }
        let inverse = matrix.try_inverse().ok_or(DesignError::NonInvertibleTransform)?;
        let sv = linear.singular_values();
        let distance_scale = sv.min();
        Ok(Transform { matrix, inverse, distance_scale, child: Box::new(child) })
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.matrix
    }

    pub fn child(&self) -> &DesignNode {
        &self.child
    }

    #[inline]
    fn to_local(&self, p: &Vec3) -> Vec3 {
        self.inverse.transform_point(&(*p).into()).coords
    }

    fn to_world(&self, p: &Vec3) -> Vec3 {
        self.matrix.transform_point(&(*p).into()).coords
    }
}

/// Overrides the child's materials with expression-defined fractions over
/// the local coordinates `x, y, z`.
#[derive(Debug, Clone, PartialEq)]
pub struct FGrade {
    pub grading: Grading,
    pub child: Box<DesignNode>,
}

/// Periodic repetition of a child with the cell centered at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    child: Box<DesignNode>,
    period: Vec3,
    explicit_period: bool,
}

impl Tile {
    /// Without a period the child's natural period is used: a named lattice's
    /// cell size, otherwise the child's bounding-box dimensions.
    pub fn new(child: DesignNode, period: Option<Vec3>) -> Result<Self, DesignError> {
        let explicit_period = period.is_some();
        let period = match period {
            Some(p) => p,
            None => child.natural_period()?,
        };
        if !(period.x > 0.0 && period.y > 0.0 && period.z > 0.0) || period.iter().any(|v| !v.is_finite()) {
            return Err(DesignError::InvalidParameter(format!(
                "tile period must be positive, got ({}, {}, {})",
                period.x, period.y, period.z
            )));
        }
        Ok(Tile { child: Box::new(child), period, explicit_period })
    }

    pub fn period(&self) -> Vec3 {
        self.period
    }

    pub fn child(&self) -> &DesignNode {
        &self.child
    }

    pub(crate) fn explicit_period(&self) -> bool {
        self.explicit_period
    }

    #[inline]
    pub fn wrap(&self, p: &Vec3) -> Vec3 {
        Vec3::new(wrap1(p.x, self.period.x), wrap1(p.y, self.period.y), wrap1(p.z, self.period.z))
    }
}

#[inline]
fn wrap1(v: f64, period: f64) -> f64 {
    let half = 0.5 * period;
    (v + half).rem_euclid(period) - half
}

/// Where an imported triangle mesh came from, kept for serialization.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Inline,
    Stl(PathBuf),
}

/// A closed triangle mesh turned into a narrow-band distance grid once at
/// construction.
#[derive(Debug, Clone)]
pub struct MeshImport {
    mesh: Arc<TriangleMesh>,
    grid: Arc<NarrowBandGrid>,
    material: MaterialId,
    cell: f64,
    source: MeshSource,
}

impl PartialEq for MeshImport {
    fn eq(&self, other: &Self) -> bool {
        self.material == other.material
            && self.cell == other.cell
            && self.source == other.source
            && (self.source != MeshSource::Inline || self.mesh == other.mesh)
    }
}

impl MeshImport {
    /// Default grid spacing, mm.
    pub const DEFAULT_CELL: f64 = 0.1;

    pub fn new(mesh: TriangleMesh, material: MaterialId, cell: f64, source: MeshSource) -> Result<Self, DesignError> {
        if !(cell > 0.0) {
            return Err(DesignError::InvalidParameter(format!("mesh grid cell must be positive, got {cell}")));
        }
        if mesh.triangles.is_empty() {
            return Err(DesignError::InvalidParameter("mesh has no triangles".into()));
        }
        let grid = NarrowBandGrid::from_mesh(&mesh, cell, NarrowBandGrid::DEFAULT_BAND_CELLS);
        Ok(MeshImport { mesh: Arc::new(mesh), grid: Arc::new(grid), material, cell, source })
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn grid(&self) -> &NarrowBandGrid {
        &self.grid
    }

    pub fn material(&self) -> MaterialId {
        self.material
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    pub fn source(&self) -> &MeshSource {
        &self.source
    }
}

/// A node of the design tree.
#[derive(Debug, Clone, PartialEq)]
pub enum DesignNode {
    Sphere(Sphere),
    RectPrism(RectPrism),
    Strut(Strut),
    Union(Combine),
    Intersection(Combine),
    Difference(Difference),
    Transform(Transform),
    FGrade(FGrade),
    Tile(Tile),
    GraphLattice(GraphLattice),
    SimulationField(Arc<SimulationField>),
    MeshImport(MeshImport),
}

impl DesignNode {
    pub fn sphere(center: Vec3, radius: f64, material: MaterialId) -> Result<Self, DesignError> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(DesignError::InvalidParameter(format!("sphere radius must be positive, got {radius}")));
        }
        Ok(DesignNode::Sphere(Sphere { center, radius, material }))
    }

    pub fn rect_prism(center: Vec3, dims: Vec3, material: MaterialId) -> Result<Self, DesignError> {
        if dims.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(DesignError::InvalidParameter(format!(
                "prism dimensions must be positive, got ({}, {}, {})",
                dims.x, dims.y, dims.z
            )));
        }
        Ok(DesignNode::RectPrism(RectPrism { center, dims, material }))
    }

    pub fn union(children: Vec<DesignNode>) -> Self {
        DesignNode::Union(Combine { children, smooth: false })
    }

    pub fn smooth_union(children: Vec<DesignNode>) -> Self {
        DesignNode::Union(Combine { children, smooth: true })
    }

    pub fn intersection(smooth: bool, children: Vec<DesignNode>) -> Result<Self, DesignError> {
        if children.is_empty() {
            return Err(DesignError::InvalidParameter("intersection needs at least one child".into()));
        }
        Ok(DesignNode::Intersection(Combine { children, smooth }))
    }

    pub fn difference(a: DesignNode, b: DesignNode) -> Self {
        DesignNode::Difference(Difference { a: Box::new(a), b: Box::new(b) })
    }

    pub fn transform(matrix: Matrix4<f64>, child: DesignNode) -> Result<Self, DesignError> {
        Ok(DesignNode::Transform(Transform::new(matrix, child)?))
    }

    pub fn translate(offset: Vec3, child: DesignNode) -> Self {
        DesignNode::transform(Matrix4::new_translation(&offset), child).expect("translations are invertible")
    }

    pub fn fgrade(
        expressions: &[impl AsRef<str>],
        materials: Vec<MaterialId>,
        probabilistic: bool,
        child: DesignNode,
    ) -> Result<Self, DesignError> {
        let grading = Grading::parse(expressions, materials, probabilistic, FGRADE_VARS)?;
        Ok(DesignNode::FGrade(FGrade { grading, child: Box::new(child) }))
    }

    pub fn tile(child: DesignNode, period: Option<Vec3>) -> Result<Self, DesignError> {
        Ok(DesignNode::Tile(Tile::new(child, period)?))
    }

    /// Signed distance in mm, negative inside.
    pub fn sdf(&self, p: &Vec3) -> f64 {
        match self {
            DesignNode::Sphere(s) => (p - s.center).norm() - s.radius,
            DesignNode::RectPrism(r) => box_sdf(&(p - r.center), &(r.dims * 0.5)),
            DesignNode::Strut(s) => s.sdf(p),
            DesignNode::Union(c) => {
                let mut it = c.children.iter().map(|n| n.sdf(p));
                let first = it.next().unwrap_or(f64::INFINITY);
                if c.smooth {
                    it.fold(first, smooth_min)
                } else {
                    it.fold(first, f64::min)
                }
            }
            DesignNode::Intersection(c) => {
                let mut it = c.children.iter().map(|n| n.sdf(p));
                let first = it.next().unwrap_or(f64::NEG_INFINITY);
                if c.smooth {
                    it.fold(first, smooth_max)
                } else {
                    it.fold(first, f64::max)
                }
            }
            DesignNode::Difference(d) => d.a.sdf(p).max(-d.b.sdf(p)),
            DesignNode::Transform(t) => t.child.sdf(&t.to_local(p)) * t.distance_scale,
            DesignNode::FGrade(g) => g.child.sdf(p),
            DesignNode::Tile(t) => t.child.sdf(&t.wrap(p)),
            DesignNode::GraphLattice(l) => l.sdf(p),
            DesignNode::SimulationField(s) => s.sdf(p),
            DesignNode::MeshImport(m) => m.grid.sample(p),
        }
    }

    /// Material fractions at `p`; empty wherever `sdf(p) > 0`.
    pub fn fractions(&self, p: &Vec3) -> FractionSet {
        self.sample(p).1
    }

    /// Both queries at once.
    pub fn sample(&self, p: &Vec3) -> (f64, FractionSet) {
        let d = self.sdf(p);
        if d > 0.0 {
            (d, FractionSet::empty())
        } else {
            (d, self.material_fractions(p))
        }
    }

    /// Material fractions at `p` ignoring the exterior test. Used by sizing
    /// and segmentation code that probes points near the surface.
    pub fn material_fractions(&self, p: &Vec3) -> FractionSet {
        match self {
            DesignNode::Sphere(s) => FractionSet::single(s.material),
            DesignNode::RectPrism(r) => FractionSet::single(r.material),
            DesignNode::Strut(s) => FractionSet::single(s.material),
            DesignNode::MeshImport(m) => FractionSet::single(m.material),
            DesignNode::Union(c) => {
                let mut best: Option<(f64, &DesignNode)> = None;
                for child in &c.children {
                    let d = child.sdf(p);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, child));
                    }
                }
                best.map(|(_, n)| n.material_fractions(p)).unwrap_or_default()
            }
            DesignNode::Intersection(c) => c.children[0].material_fractions(p),
            DesignNode::Difference(d) => d.a.material_fractions(p),
            DesignNode::Transform(t) => t.child.material_fractions(&t.to_local(p)),
            DesignNode::FGrade(g) => match g.grading.eval(&[p.x, p.y, p.z]) {
                Some(f) => f,
                None => g.child.material_fractions(p),
            },
            DesignNode::Tile(t) => t.child.material_fractions(&t.wrap(p)),
            DesignNode::GraphLattice(l) => l.material_fractions(p),
            DesignNode::SimulationField(s) => s.material_fractions(p),
        }
    }

    /// Conservative axis-aligned bounds.
    pub fn bounds(&self) -> Result<BBox, DesignError> {
        match self.bounds_opt() {
            Bound::Box(b) if b.is_empty() => Err(DesignError::EmptyDesign),
            Bound::Box(b) => Ok(b),
            Bound::Unbounded => Err(DesignError::Unbounded),
            Bound::Nothing => Err(DesignError::EmptyDesign),
        }
    }

    fn bounds_opt(&self) -> Bound {
        match self {
            DesignNode::Sphere(s) => Bound::Box(BBox::from_center_half(s.center, Vec3::repeat(s.radius))),
            DesignNode::RectPrism(r) => Bound::Box(BBox::from_center_half(r.center, r.dims * 0.5)),
            DesignNode::Strut(s) => Bound::Box(s.bounds()),
            DesignNode::GraphLattice(l) => Bound::Box(l.bounds()),
            DesignNode::SimulationField(s) => Bound::Box(s.bounds()),
            DesignNode::MeshImport(m) => Bound::Box(m.mesh.bounds()),
            DesignNode::Tile(_) => Bound::Unbounded,
            DesignNode::Union(c) => {
                let mut acc = Bound::Nothing;
                for child in &c.children {
                    acc = match (acc, child.bounds_opt()) {
                        (Bound::Unbounded, _) | (_, Bound::Unbounded) => Bound::Unbounded,
                        (Bound::Nothing, b) | (b, Bound::Nothing) => b,
                        (Bound::Box(a), Bound::Box(b)) => Bound::Box(a.union(&b)),
                    };
                }
                if c.smooth {
                    acc.expand(0.25 * SMOOTH_K)
                } else {
                    acc
                }
            }
            DesignNode::Intersection(c) => {
                let mut acc = Bound::Unbounded;
                for child in &c.children {
                    acc = match (acc, child.bounds_opt()) {
                        (Bound::Nothing, _) | (_, Bound::Nothing) => Bound::Nothing,
                        (Bound::Unbounded, b) | (b, Bound::Unbounded) => b,
                        (Bound::Box(a), Bound::Box(b)) => Bound::Box(a.intersection(&b)),
                    };
                }
                acc
            }
            DesignNode::Difference(d) => d.a.bounds_opt(),
            DesignNode::FGrade(g) => g.child.bounds_opt(),
            DesignNode::Transform(t) => match t.child.bounds_opt() {
                Bound::Box(b) if !b.is_empty() => Bound::Box(BBox::from_points(&b.corners().map(|c| t.to_world(&c)))),
                other => other,
            },
        }
    }

    /// Repeat distance used when a `Tile` is built without an explicit period.
    pub fn natural_period(&self) -> Result<Vec3, DesignError> {
        match self {
            DesignNode::GraphLattice(l) if l.cell_size().is_some() => Ok(l.cell_size().unwrap()),
            DesignNode::FGrade(g) => g.child.natural_period(),
            _ => Ok(self.bounds()?.size()),
        }
    }

    /// Every material that can carry a non-zero fraction somewhere.
    pub fn fraction_materials(&self) -> BTreeSet<MaterialId> {
        let mut out = BTreeSet::new();
        self.collect_materials(&mut out);
        out
    }

    fn collect_materials(&self, out: &mut BTreeSet<MaterialId>) {
        match self {
            DesignNode::Sphere(s) => {
                out.insert(s.material);
            }
            DesignNode::RectPrism(r) => {
                out.insert(r.material);
            }
            DesignNode::Strut(s) => {
                out.insert(s.material);
            }
            DesignNode::MeshImport(m) => {
                out.insert(m.material);
            }
            DesignNode::Union(c) => c.children.iter().for_each(|n| n.collect_materials(out)),
            DesignNode::Intersection(c) => c.children[0].collect_materials(out),
            DesignNode::Difference(d) => d.a.collect_materials(out),
            DesignNode::Transform(t) => t.child.collect_materials(out),
            DesignNode::FGrade(g) => out.extend(g.grading.materials().iter().copied()),
            DesignNode::Tile(t) => t.child.collect_materials(out),
            DesignNode::GraphLattice(l) => out.extend(l.fraction_materials()),
            DesignNode::SimulationField(s) => out.extend(s.grading().materials().iter().copied()),
        }
    }

    /// Total NaN expression results seen by grading nodes in this tree.
    pub fn nan_events(&self) -> u64 {
        match self {
            DesignNode::FGrade(g) => g.grading.nan_events() + g.child.nan_events(),
            DesignNode::Union(c) | DesignNode::Intersection(c) => c.children.iter().map(DesignNode::nan_events).sum(),
            DesignNode::Difference(d) => d.a.nan_events() + d.b.nan_events(),
            DesignNode::Transform(t) => t.child.nan_events(),
            DesignNode::Tile(t) => t.child.nan_events(),
            DesignNode::GraphLattice(l) => l.nan_events(),
            DesignNode::SimulationField(s) => s.grading().nan_events(),
            _ => 0,
        }
    }

    /// Central-difference gradient of the distance field.
    pub fn sdf_gradient(&self, p: &Vec3, h: f64) -> Vec3 {
        let dx = Vec3::new(h, 0.0, 0.0);
        let dy = Vec3::new(0.0, h, 0.0);
        let dz = Vec3::new(0.0, 0.0, h);
        Vec3::new(
            self.sdf(&(p + dx)) - self.sdf(&(p - dx)),
            self.sdf(&(p + dy)) - self.sdf(&(p - dy)),
            self.sdf(&(p + dz)) - self.sdf(&(p - dz)),
        ) / (2.0 * h)
    }
}

enum Bound {
    Box(BBox),
    Unbounded,
    Nothing,
}

impl Bound {
    fn expand(self, by: f64) -> Bound {
        match self {
            Bound::Box(b) if !b.is_empty() => Bound::Box(b.expanded(by)),
            other => other,
        }
    }
}

/// Exact distance to a box of half-extents `half` centered at the origin.
#[inline]
pub fn box_sdf(p: &Vec3, half: &Vec3) -> f64 {
    let q = p.abs() - half;
    let outside = q.sup(&Vec3::zeros()).norm();
    let inside = q.x.max(q.y).max(q.z).min(0.0);
    outside + inside
}

#[inline]
fn smooth_min(a: f64, b: f64) -> f64 {
    let h = (SMOOTH_K - (a - b).abs()).max(0.0) / SMOOTH_K;
    a.min(b) - h * h * SMOOTH_K * 0.25
}

#[inline]
fn smooth_max(a: f64, b: f64) -> f64 {
    -smooth_min(-a, -b)
}

/// The default table plus the design root, ready for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub materials: MaterialTable,
    pub root: DesignNode,
}

impl Design {
    pub fn new(materials: MaterialTable, root: DesignNode) -> Self {
        Design { materials, root }
    }
}

