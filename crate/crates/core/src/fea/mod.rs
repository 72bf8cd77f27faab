//! Simulation meshes: uniform C3D8R brick grids and adaptive C3D4 tets
//! sized by local material heterogeneity, with one discrete material per
//! element drawn from the centroid fractions.

mod bricks;
mod check;
mod tets;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::design::{Design, DesignError};
use crate::dither::Mode;
use crate::expr::{ExprError, ExprProgram};
use crate::fractions::FractionSet;
use crate::geom::Vec3;
use crate::inp::{Element, ElementType, InpMesh, MaterialCard, Node, Section};
use crate::material::{MaterialId, MaterialTable};

pub use bricks::{export_bricks, DEFAULT_ELEMENT_CAP};
pub use check::{check_mesh, MeshDefect};
pub use tets::{export_tets, MAX_DEPTH};

#[derive(Debug, Error)]
pub enum FeaError {
    #[error("heterogeneity needs at least two materials, got {0}")]
    TooFewMaterials(usize),
    #[error("fraction set has {got} materials but n = {n}")]
    TooManyFractions { got: usize, n: usize },
    #[error("invalid sizing: {0}")]
    Sizing(String),
    #[error("sizing expression: {0}")]
    SizingExpr(#[from] ExprError),
    #[error("export would create {count} elements, over the cap of {cap}")]
    TooManyElements { count: u64, cap: u64 },
    #[error("invalid resolution {0}")]
    Resolution(f64),
    #[error(transparent)]
    Design(#[from] DesignError),
}

/// Normalized deviation of fractions from the uniform mixture over `values.len()`
/// materials: 0 for an even mix, 1 for a pure material.
pub fn heterogeneity_of(values: &[f64]) -> Result<f64, FeaError> {
    let n = values.len();
    if n < 2 {
        return Err(FeaError::TooFewMaterials(n));
    }
    let u = 1.0 / n as f64;
    let ss: f64 = values.iter().map(|f| (f - u) * (f - u)).sum();
    Ok((ss.sqrt() / (1.0 - u).sqrt()).clamp(0.0, 1.0))
}

/// [`heterogeneity_of`] for a sparse set; materials absent from `f` count as 0.
pub fn heterogeneity(f: &FractionSet, n: usize) -> Result<f64, FeaError> {
    if n < 2 {
        return Err(FeaError::TooFewMaterials(n));
    }
    if f.len() > n {
        return Err(FeaError::TooManyFractions { got: f.len(), n });
    }
    let mut values: Vec<f64> = f.iter().map(|(_, v)| v).collect();
    values.resize(n, 0.0);
    heterogeneity_of(&values)
}

/// Element edge length as a function of heterogeneity `h`.
#[derive(Debug)]
pub struct SizingField {
    min_cell: f64,
    max_cell: f64,
    expr: Option<ExprProgram>,
    clamped: Arc<AtomicU64>,
}

impl Clone for SizingField {
    fn clone(&self) -> Self {
        SizingField {
            min_cell: self.min_cell,
            max_cell: self.max_cell,
            expr: self.expr.clone(),
            clamped: Arc::new(AtomicU64::new(self.clamped.load(Ordering::Relaxed))),
        }
    }
}

impl SizingField {
    /// Linear map `min + h·(max − min)`.
    pub fn new(min_cell: f64, max_cell: f64) -> Result<Self, FeaError> {
        if !(min_cell > 0.0) || !min_cell.is_finite() || !max_cell.is_finite() || min_cell > max_cell {
            return Err(FeaError::Sizing(format!("need 0 < min_cell <= max_cell, got {min_cell} and {max_cell}")));
        }
        Ok(SizingField { min_cell, max_cell, expr: None, clamped: Arc::default() })
    }

    /// Custom mapping over the single variable `h`. Results are clamped to
    /// `[min_cell, max_cell]`.
    pub fn with_expression(min_cell: f64, max_cell: f64, src: &str) -> Result<Self, FeaError> {
        let mut s = SizingField::new(min_cell, max_cell)?;
        let e = ExprProgram::parse(src)?;
        if let Some(v) = e.unbound_in(&["h"]) {
            return Err(FeaError::Sizing(format!("sizing expression may only use h, found '{v}'")));
        }
        s.expr = Some(e);
        Ok(s)
    }

    pub fn min_cell(&self) -> f64 {
        self.min_cell
    }

    pub fn max_cell(&self) -> f64 {
        self.max_cell
    }

    pub fn expression(&self) -> Option<&str> {
        self.expr.as_ref().map(|e| e.source())
    }

    /// How many evaluations fell outside `[min_cell, max_cell]`.
    pub fn clamped_count(&self) -> u64 {
        self.clamped.load(Ordering::Relaxed)
    }

    pub fn cell_size(&self, h: f64) -> f64 {
        let h = h.clamp(0.0, 1.0);
        let raw = match &self.expr {
            None => return self.min_cell + h * (self.max_cell - self.min_cell),
            Some(e) if e.vars().is_empty() => e.eval_slots(&[]),
            Some(e) => e.eval_slots(&[h]),
        };
        if raw >= self.min_cell && raw <= self.max_cell {
            return raw;
        }
        if self.clamped.fetch_add(1, Ordering::Relaxed) == 0 {
            log::warn!("sizing expression gave {raw} at h = {h}; clamping to [{}, {}]", self.min_cell, self.max_cell);
        }
        if raw.is_nan() {
            self.max_cell
        } else {
            raw.clamp(self.min_cell, self.max_cell)
        }
    }
}

/// Settings shared by both exporters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExportOptions {
    pub seed: u64,
    pub mode: Mode,
    /// Refuse exports above this many elements.
    pub element_cap: u64,
}

impl Default for ExportOptions {
    fn default() -> Self {
        ExportOptions { seed: 0, mode: Mode::Probabilistic, element_cap: DEFAULT_ELEMENT_CAP }
    }
}

/// Counters describing one export.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct ExportReport {
    pub elements: usize,
    pub nodes: usize,
    /// Octree leaves before tetrahedralization (tets only).
    pub leaves: usize,
    /// Boundary vertices moved onto the surface.
    pub snapped: usize,
    /// Snaps undone because they flattened a neighboring tet.
    pub reverted: usize,
    /// Zero or negative volume tets dropped after snapping.
    pub discarded: usize,
    /// Refinement stopped at [`MAX_DEPTH`] somewhere.
    pub depth_capped: bool,
    /// Sizing expression results that had to be clamped.
    pub sizing_clamped: u64,
    /// Elements whose centroid had no material fractions.
    pub unassigned: usize,
}

/// Nodes plus single-type connectivity with one material per element.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaMesh {
    pub kind: ElementType,
    pub nodes: Vec<Vec3>,
    /// `kind.node_count()` indices into `nodes` per element.
    pub connectivity: Vec<u32>,
    pub materials: Vec<MaterialId>,
}

impl FeaMesh {
    pub fn len(&self) -> usize {
        self.materials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.materials.is_empty()
    }

    pub fn element(&self, e: usize) -> &[u32] {
        let k = self.kind.node_count();
        &self.connectivity[e * k..(e + 1) * k]
    }

    /// Element volume. Bricks are split into six tets.
    pub fn volume(&self, e: usize) -> f64 {
        let n = self.element(e);
        let p = |i: usize| self.nodes[n[i] as usize];
        match self.kind {
            ElementType::C3D4 => tet_volume(&p(0), &p(1), &p(2), &p(3)),
            ElementType::C3D8R => HEX_TETS.iter().map(|t| tet_volume(&p(t[0]), &p(t[1]), &p(t[2]), &p(t[3]))).sum(),
        }
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.len()).map(|e| self.volume(e)).sum()
    }

    /// Element counts per material id.
    pub fn material_counts(&self) -> std::collections::BTreeMap<MaterialId, usize> {
        let mut out = std::collections::BTreeMap::new();
        for m in &self.materials {
            *out.entry(*m).or_insert(0) += 1;
        }
        out
    }

    /// INP model with 1-based ids, one element set per material (named
    /// after it) and elastic cards for materials that have one. `cards`
    /// overrides the built-in rigid/soft values by name.
    pub fn to_inp(&self, table: &MaterialTable, cards: &[MaterialCard]) -> InpMesh {
        let nodes = self.nodes.iter().enumerate().map(|(i, p)| Node { id: i as u64 + 1, position: *p }).collect();
        let elements = (0..self.len())
            .map(|e| Element {
                id: e as u64 + 1,
                kind: self.kind,
                nodes: self.element(e).iter().map(|&n| n as u64 + 1).collect(),
            })
            .collect();
        let mut inp = InpMesh { nodes, elements, ..InpMesh::default() };
        for (m, _) in self.material_counts() {
            let name = table.name(m).map(str::to_string).unwrap_or_else(|| format!("material_{}", m.0));
            let ids = (0..self.len()).filter(|&e| self.materials[e] == m).map(|e| e as u64 + 1).collect();
            inp.elsets.push((name.clone(), ids));
            let card = cards.iter().find(|c| c.name == name).cloned().or_else(|| MaterialCard::default_for(&name));
            if let Some(card) = card {
                inp.sections.push(Section { elset: name.clone(), material: card.name.clone() });
                inp.materials.push(card);
            }
        }
        inp
    }
}

pub(crate) fn tet_volume(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).dot(&(c - a).cross(&(d - a))) / 6.0
}

/// Positive-volume split of a brick with bottom face 0-1-2-3 and top 4-5-6-7.
const HEX_TETS: [[usize; 4]; 6] = [[0, 1, 2, 6], [0, 2, 3, 6], [0, 3, 7, 6], [0, 7, 4, 6], [0, 4, 5, 6], [0, 5, 1, 6]];

/// Number of materials used for heterogeneity; 1 when the design cannot mix.
pub(crate) fn mixing_materials(design: &Design) -> usize {
    design.root.fraction_materials().len()
}
