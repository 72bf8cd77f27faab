//! Struts, unit-cell topologies and graph lattices with three grading scopes.
//!
//! Struts are capsules: the swept sphere of diameter `d` along the segment,
//! so each strut reaches `d/2` past its endpoints. Named cells are centered
//! on the origin so they tile directly with [`crate::design::Tile`].

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::bvh::Bvh;
use crate::design::{DesignError, DesignNode};
use crate::fractions::FractionSet;
use crate::geom::{closest_on_segment, vec3, BBox, Vec3};
use crate::grading::Grading;
use crate::material::MaterialId;

/// Variables visible to per-strut expressions: position plus `t`, the
/// normalized coordinate of the closest axis point (0 at `a`, 1 at `b`).
pub const STRUT_VARS: &[&str] = &["x", "y", "z", "t"];

#[derive(Debug, Clone, PartialEq)]
pub struct Strut {
    pub a: Vec3,
    pub b: Vec3,
    pub diameter: f64,
    pub material: MaterialId,
}

impl Strut {
    pub fn new(a: Vec3, b: Vec3, diameter: f64, material: MaterialId) -> Result<Self, DesignError> {
        if a == b {
            return Err(DesignError::InvalidParameter("strut endpoints coincide".into()));
        }
        if !(diameter > 0.0) || !diameter.is_finite() {
            return Err(DesignError::InvalidParameter(format!("strut diameter must be positive, got {diameter}")));
        }
        Ok(Strut { a, b, diameter, material })
    }

    #[inline]
    pub fn sdf(&self, p: &Vec3) -> f64 {
        (p - closest_on_segment(p, &self.a, &self.b)).norm() - 0.5 * self.diameter
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    pub fn bounds(&self) -> BBox {
        BBox::from_points([&self.a, &self.b]).expanded(0.5 * self.diameter)
    }

    fn axis_param(&self, p: &Vec3) -> f64 {
        let ab = self.b - self.a;
        ((p - self.a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    SimpleCubic,
    BodyCenteredCubic,
    FaceCenteredCubic,
    Octet,
}

impl Topology {
    pub fn name(self) -> &'static str {
        match self {
            Topology::SimpleCubic => "simple_cubic",
            Topology::BodyCenteredCubic => "body_centered_cubic",
            Topology::FaceCenteredCubic => "face_centered_cubic",
            Topology::Octet => "octet",
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Topology {
    type Err = DesignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Ok(match norm.as_str() {
            "simplecubic" | "sc" => Topology::SimpleCubic,
            "bodycenteredcubic" | "bcc" => Topology::BodyCenteredCubic,
            "facecenteredcubic" | "fcc" => Topology::FaceCenteredCubic,
            "octet" | "octettruss" => Topology::Octet,
            _ => return Err(DesignError::InvalidParameter(format!("unknown lattice topology '{s}'"))),
        })
    }
}

/// Unit-cell edge lists for a cell of size `cell` centered at the origin.
///
/// * simple cubic: the 12 cube edges
/// * BCC: 8 struts from each corner to the center
/// * FCC: 24 struts from each face center to that face's 4 corners
/// * octet: FCC plus the 12 edges of the octahedron joining adjacent face centers
pub fn topology_edges(topology: Topology, cell: Vec3) -> Result<Vec<(Vec3, Vec3)>, DesignError> {
    if !(cell.x > 0.0 && cell.y > 0.0 && cell.z > 0.0) {
        return Err(DesignError::InvalidParameter("cell size must be positive".into()));
    }
    let h = cell * 0.5;
    let corner = |i: usize| vec3(if i & 1 == 0 { -h.x } else { h.x }, if i & 2 == 0 { -h.y } else { h.y }, if i & 4 == 0 { -h.z } else { h.z });
    let mut edges = Vec::new();
    match topology {
        Topology::SimpleCubic => {
            for i in 0..8 {
                for bit in [1, 2, 4] {
                    if i & bit == 0 {
                        edges.push((corner(i), corner(i | bit)));
                    }
                }
            }
        }
        Topology::BodyCenteredCubic => {
            for i in 0..8 {
                edges.push((corner(i), Vec3::zeros()));
            }
        }
        Topology::FaceCenteredCubic | Topology::Octet => {
            let faces = face_centers(&h);
            for (axis, fc) in faces.iter().enumerate() {
                let axis = axis / 2;
                for i in 0..8 {
                    let c = corner(i);
                    if c[axis] == fc[axis] {
                        edges.push((*fc, c));
                    }
                }
            }
            if topology == Topology::Octet {
                for i in 0..6 {
                    for j in (i + 1)..6 {
                        // skip opposite faces
                        if i / 2 != j / 2 {
                            edges.push((faces[i], faces[j]));
                        }
                    }
                }
            }
        }
    }
    Ok(edges)
}

fn face_centers(h: &Vec3) -> [Vec3; 6] {
    [
        vec3(-h.x, 0.0, 0.0),
        vec3(h.x, 0.0, 0.0),
        vec3(0.0, -h.y, 0.0),
        vec3(0.0, h.y, 0.0),
        vec3(0.0, 0.0, -h.z),
        vec3(0.0, 0.0, h.z),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub enum LatticeLayout {
    Named { topology: Topology, cell_size: Vec3 },
    Edges(Vec<(Vec3, Vec3)>),
}

/// Union of struts answered through a bounding-volume hierarchy.
#[derive(Debug, Clone)]
pub struct GraphLattice {
    layout: LatticeLayout,
    diameter: f64,
    material: MaterialId,
    struts: Vec<Strut>,
    grades: Option<Vec<Grading>>,
    bvh: Bvh,
}

impl PartialEq for GraphLattice {
    fn eq(&self, other: &Self) -> bool {
        self.layout == other.layout
            && self.diameter == other.diameter
            && self.material == other.material
            && self.grades == other.grades
    }
}

impl GraphLattice {
    pub fn new(layout: LatticeLayout, diameter: f64, material: MaterialId) -> Result<Self, DesignError> {
        let edges = match &layout {
            LatticeLayout::Named { topology, cell_size } => {
                let min_dim = cell_size.x.min(cell_size.y).min(cell_size.z);
                if diameter >= min_dim {
                    return Err(DesignError::InvalidParameter(format!(
                        "strut diameter {diameter} must be below the smallest cell dimension {min_dim}"
                    )));
                }
                topology_edges(*topology, *cell_size)?
            }
            LatticeLayout::Edges(e) => e.clone(),
        };
        if edges.is_empty() {
            return Err(DesignError::InvalidParameter("lattice has no edges".into()));
        }
        let struts = edges
            .iter()
            .map(|(a, b)| Strut::new(*a, *b, diameter, material))
            .collect::<Result<Vec<_>, _>>()?;
        let boxes: Vec<BBox> = struts.iter().map(Strut::bounds).collect();
        let bvh = Bvh::build(&boxes);
        Ok(GraphLattice { layout, diameter, material, struts, grades: None, bvh })
    }

    pub fn named(topology: Topology, cell_size: Vec3, diameter: f64, material: MaterialId) -> Result<Self, DesignError> {
        GraphLattice::new(LatticeLayout::Named { topology, cell_size }, diameter, material)
    }

    pub fn from_edges(edges: Vec<(Vec3, Vec3)>, diameter: f64, material: MaterialId) -> Result<Self, DesignError> {
        GraphLattice::new(LatticeLayout::Edges(edges), diameter, material)
    }

    /// Attaches one grading per strut, in strut order.
    pub fn with_strut_grades(mut self, grades: Vec<Grading>) -> Result<Self, DesignError> {
        if grades.len() != self.struts.len() {
            return Err(DesignError::InvalidParameter(format!(
                "per-strut grading needs one expression list per strut ({} struts, {} lists)",
                self.struts.len(),
                grades.len()
            )));
        }
        self.grades = Some(grades);
        Ok(self)
    }

    pub fn layout(&self) -> &LatticeLayout {
        &self.layout
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn material(&self) -> MaterialId {
        self.material
    }

    pub fn struts(&self) -> &[Strut] {
        &self.struts
    }

    pub fn strut_grades(&self) -> Option<&[Grading]> {
        self.grades.as_deref()
    }

    pub fn cell_size(&self) -> Option<Vec3> {
        match self.layout {
            LatticeLayout::Named { cell_size, .. } => Some(cell_size),
            LatticeLayout::Edges(_) => None,
        }
    }

    pub fn bounds(&self) -> BBox {
        self.bvh.bounds()
    }

    /// Index and distance of the closest strut; ties go to the lowest index.
    pub fn nearest_strut(&self, p: &Vec3) -> (f64, usize) {
        self.bvh
            .nearest(p, -0.5 * self.diameter, |i| self.struts[i].sdf(p))
            .expect("lattice has struts")
    }

    pub fn sdf(&self, p: &Vec3) -> f64 {
        self.nearest_strut(p).0
    }

    /// Reference minimum over every strut without the hierarchy.
    pub fn sdf_brute_force(&self, p: &Vec3) -> f64 {
        self.struts.iter().map(|s| s.sdf(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn material_fractions(&self, p: &Vec3) -> FractionSet {
        let (_, i) = self.nearest_strut(p);
        match &self.grades {
            Some(g) => {
                let t = self.struts[i].axis_param(p);
                g[i].eval(&[p.x, p.y, p.z, t]).unwrap_or_else(|| FractionSet::single(self.material))
            }
            None => FractionSet::single(self.material),
        }
    }

    pub fn fraction_materials(&self) -> BTreeSet<MaterialId> {
        match &self.grades {
            Some(g) => g.iter().flat_map(|g| g.materials().iter().copied()).collect(),
            None => BTreeSet::from([self.material]),
        }
    }

    pub fn nan_events(&self) -> u64 {
        self.grades.iter().flatten().map(Grading::nan_events).sum()
    }
}

/// Where a lattice gradient is applied.
#[derive(Debug, Clone)]
pub enum LatticeGrading {
    /// One field over the whole tiled lattice, in world coordinates.
    Global { expressions: Vec<String>, materials: Vec<MaterialId>, probabilistic: bool },
    /// One field inside the unit cell, repeated by the tiling.
    PerCell { expressions: Vec<String>, materials: Vec<MaterialId>, probabilistic: bool },
    /// One expression list per strut, over [`STRUT_VARS`].
    PerStrut { expressions: Vec<Vec<String>>, materials: Vec<MaterialId>, probabilistic: bool },
}

/// Builds a graded lattice node from a unit cell.
///
/// With `tile` the cell is repeated at its natural period: global grading
/// wraps the tiling, per-cell grading wraps the cell before tiling, and
/// per-strut grading grades each strut before the union.
pub fn grade_lattice(cell: GraphLattice, tile: bool, grading: LatticeGrading) -> Result<DesignNode, DesignError> {
    let tiled = |node: DesignNode| -> Result<DesignNode, DesignError> {
        if tile {
            DesignNode::tile(node, None)
        } else {
            Ok(node)
        }
    };
    match grading {
        LatticeGrading::Global { expressions, materials, probabilistic } => {
            let inner = tiled(DesignNode::GraphLattice(cell))?;
            DesignNode::fgrade(&expressions, materials, probabilistic, inner)
        }
        LatticeGrading::PerCell { expressions, materials, probabilistic } => {
            let period = cell.cell_size();
            let graded = DesignNode::fgrade(&expressions, materials, probabilistic, DesignNode::GraphLattice(cell))?;
            if tile {
                DesignNode::tile(graded, period)
            } else {
                Ok(graded)
            }
        }
        LatticeGrading::PerStrut { expressions, materials, probabilistic } => {
            if expressions.is_empty() {
                return Err(DesignError::InvalidParameter(
                    "per-strut grading needs one expression list per strut".into(),
                ));
            }
            let grades = expressions
                .iter()
                .map(|e| Grading::parse(e, materials.clone(), probabilistic, STRUT_VARS))
                .collect::<Result<Vec<_>, _>>()?;
            tiled(DesignNode::GraphLattice(cell.with_strut_grades(grades)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRAY: MaterialId = MaterialId(8);

    fn axis_strut() -> Strut {
        Strut::new(Vec3::zeros(), vec3(0.0, 0.0, 10.0), 0.35, GRAY).unwrap()
    }

    #[test]
    fn strut_distance_cases() {
        let s = axis_strut();
        assert!(s.sdf(&vec3(0.175, 0.0, 5.0)).abs() < 1e-15);
        assert_eq!(s.sdf(&vec3(0.0, 0.0, 5.0)), -0.175);
        assert!(s.sdf(&vec3(0.0, 0.0, 10.175)).abs() < 1e-12);
    }

    #[test]
    fn strut_validation() {
        assert!(Strut::new(Vec3::zeros(), Vec3::zeros(), 1.0, GRAY).is_err());
        assert!(Strut::new(Vec3::zeros(), vec3(1.0, 0.0, 0.0), 0.0, GRAY).is_err());
    }

    #[test]
    fn edge_counts_and_lengths() {
        let cell = Vec3::repeat(10.0);
        let check = |t: Topology, count: usize, len: f64| {
            let e = topology_edges(t, cell).unwrap();
            assert_eq!(e.len(), count, "{t}");
            for (a, b) in &e {
                assert!(((b - a).norm() - len).abs() < 1e-12, "{t}: {}", (b - a).norm());
            }
        };
        check(Topology::SimpleCubic, 12, 10.0);
        check(Topology::BodyCenteredCubic, 8, (3.0f64 * 25.0).sqrt());
        check(Topology::FaceCenteredCubic, 24, (2.0f64 * 25.0).sqrt());
        let octet = topology_edges(Topology::Octet, cell).unwrap();
        assert_eq!(octet.len(), 36);
    }

    #[test]
    fn topology_names() {
        assert_eq!("BodyCenteredCubic".parse::<Topology>().unwrap(), Topology::BodyCenteredCubic);
        assert_eq!("fcc".parse::<Topology>().unwrap(), Topology::FaceCenteredCubic);
        assert!("gyroid".parse::<Topology>().is_err());
    }

    #[test]
    fn bcc_cell_center() {
        let l = GraphLattice::named(Topology::BodyCenteredCubic, Vec3::repeat(5.0), 0.35, GRAY).unwrap();
        assert_eq!(l.sdf(&Vec3::zeros()), -0.175);
    }

    #[test]
    fn diameter_must_fit_cell() {
        assert!(GraphLattice::named(Topology::SimpleCubic, Vec3::repeat(1.0), 1.0, GRAY).is_err());
        assert!(GraphLattice::from_edges(vec![], 0.3, GRAY).is_err());
    }

    #[test]
    fn per_strut_requires_expressions() {
        let l = GraphLattice::named(Topology::BodyCenteredCubic, Vec3::repeat(5.0), 0.35, GRAY).unwrap();
        let g = LatticeGrading::PerStrut { expressions: vec![], materials: vec![MaterialId(0)], probabilistic: true };
        assert!(grade_lattice(l.clone(), true, g).is_err());
        let g = LatticeGrading::PerStrut {
            expressions: vec![vec!["1".to_string()]; 3],
            materials: vec![MaterialId(0)],
            probabilistic: true,
        };
        assert!(grade_lattice(l, true, g).is_err());
    }
}
