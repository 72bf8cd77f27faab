//! Simulation results as a design node.
//!
//! Geometry comes from the boundary of a tetrahedral FEA mesh, sampled into
//! a [`NarrowBandGrid`]. Materials come from nodal results interpolated
//! barycentrically inside the containing tet and mapped through grading
//! expressions over the result columns (plus `len` when `dx, dy, dz` exist).

mod results;
mod tetmesh;

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::design::DesignError;
use crate::fractions::FractionSet;
use crate::geom::{BBox, Vec3};
use crate::grading::Grading;
use crate::inp::{parse_inp, InpError};
use crate::material::MaterialId;
use crate::narrowband::NarrowBandGrid;

pub use results::{parse_results_csv, NodalResults};
pub use tetmesh::{barycentric, contains, locate_brute_force, AabbTree, TetMesh, CONTAINMENT_EPS, MIN_TET_VOLUME};

#[derive(Debug, Error)]
pub enum SimFieldError {
    #[error(transparent)]
    Inp(#[from] InpError),
    #[error("results CSV: {0}")]
    Csv(String),
    #[error("results CSV has no rows for {count} mesh nodes (first: {first:?})")]
    MissingNodes { count: usize, first: Vec<u64> },
    #[error("element {element} is degenerate (volume {volume:e} mm³)")]
    DegenerateTet { element: u64, volume: f64 },
    #[error("mesh: {0}")]
    Mesh(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Default spacing of the distance grid, mm.
pub const DEFAULT_GRID_CELL: f64 = 0.1;

pub struct SimulationField {
    mesh: TetMesh,
    tree: AabbTree,
    results: NodalResults,
    grading: Grading,
    grid: NarrowBandGrid,
    surface_bounds: BBox,
    grid_cell: f64,
    sources: Option<(PathBuf, PathBuf)>,
}

impl fmt::Debug for SimulationField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimulationField")
            .field("tets", &self.mesh.len())
            .field("nodes", &self.mesh.positions().len())
            .field("variables", &self.results.variables())
            .field("grid_cell", &self.grid_cell)
            .field("sources", &self.sources)
            .finish()
    }
}

impl PartialEq for SimulationField {
    fn eq(&self, other: &Self) -> bool {
        self.grading == other.grading
            && self.grid_cell == other.grid_cell
            && self.sources == other.sources
            && self.mesh.positions() == other.mesh.positions()
            && self.mesh.tets() == other.mesh.tets()
            && self.results == other.results
    }
}

impl SimulationField {
    pub fn new(
        mesh: TetMesh,
        results: NodalResults,
        expressions: &[impl AsRef<str>],
        materials: Vec<MaterialId>,
        probabilistic: bool,
        grid_cell: f64,
    ) -> Result<Self, DesignError> {
        if !(grid_cell > 0.0) {
            return Err(DesignError::InvalidParameter(format!("grid cell must be positive, got {grid_cell}")));
        }
        if mesh.is_empty() {
            return Err(SimFieldError::Mesh("mesh has no elements".into()).into());
        }
        let vars = results.variables();
        let names: Vec<&str> = vars.iter().map(String::as_str).collect();
        let grading = Grading::parse(expressions, materials, probabilistic, &names)?;
        let boundary = mesh.extract_boundary();
        let surface_bounds = boundary.bounds();
        let grid = NarrowBandGrid::from_mesh(&boundary, grid_cell, NarrowBandGrid::DEFAULT_BAND_CELLS);
        let tree = AabbTree::build(&mesh);
        Ok(SimulationField { mesh, tree, results, grading, grid, surface_bounds, grid_cell, sources: None })
    }

    /// Loads an INP mesh and its results CSV.
    pub fn from_files(
        inp_path: &Path,
        csv_path: &Path,
        expressions: &[impl AsRef<str>],
        materials: Vec<MaterialId>,
        probabilistic: bool,
        grid_cell: f64,
    ) -> Result<Self, DesignError> {
        let read = |p: &Path| std::fs::read(p).map_err(|source| SimFieldError::Io { path: p.to_path_buf(), source });
        let inp_bytes = read(inp_path)?;
        let inp = parse_inp(&String::from_utf8_lossy(&inp_bytes)).map_err(SimFieldError::from)?;
        let mesh = TetMesh::from_inp(&inp)?;
        let results = parse_results_csv(&read(csv_path)?, mesh.node_ids())?;
        let mut field = SimulationField::new(mesh, results, expressions, materials, probabilistic, grid_cell)?;
        field.sources = Some((inp_path.to_path_buf(), csv_path.to_path_buf()));
        Ok(field)
    }

    pub fn mesh(&self) -> &TetMesh {
        &self.mesh
    }

    pub fn tree(&self) -> &AabbTree {
        &self.tree
    }

    pub fn results(&self) -> &NodalResults {
        &self.results
    }

    pub fn grading(&self) -> &Grading {
        &self.grading
    }

    pub fn grid(&self) -> &NarrowBandGrid {
        &self.grid
    }

    pub fn grid_cell(&self) -> f64 {
        self.grid_cell
    }

    /// INP and CSV paths when loaded from files.
    pub fn sources(&self) -> Option<(&Path, &Path)> {
        self.sources.as_ref().map(|(a, b)| (a.as_path(), b.as_path()))
    }

    /// Bounds of the mesh boundary surface.
    pub fn bounds(&self) -> BBox {
        self.surface_bounds
    }

    pub fn sdf(&self, p: &Vec3) -> f64 {
        self.grid.sample(p)
    }

    /// `Σ λᵢ Rᵢ` over the result columns of tet `t`, followed by `len`
    /// recomputed from the interpolated components.
    pub fn interpolate_in(&self, t: usize, lambda: &[f64; 4]) -> Vec<f64> {
        let w = self.results.columns().len();
        let mut acc = vec![0.0; w];
        for (k, &node) in self.mesh.tets()[t].iter().enumerate() {
            for (a, v) in acc.iter_mut().zip(self.results.row(node as usize)) {
                *a += lambda[k] * v;
            }
        }
        let mut out = Vec::with_capacity(w + 1);
        self.results.complete(&acc, &mut out);
        out
    }

    /// Interpolated results at `p`, or `None` outside the mesh.
    pub fn interpolate(&self, p: &Vec3) -> Option<Vec<f64>> {
        let t = self.tree.locate(&self.mesh, p)?;
        Some(self.interpolate_in(t, &barycentric(&self.mesh.corners(t), p)))
    }

    /// Results at `p`; points slightly outside the mesh use the best nearby
    /// tet with barycentric weights clamped onto it.
    fn values_near(&self, p: &Vec3) -> Option<Vec<f64>> {
        if let Some(v) = self.interpolate(p) {
            return Some(v);
        }
        let reach = 2.0 * self.grid_cell * NarrowBandGrid::DEFAULT_BAND_CELLS as f64;
        let t = self.tree.nearest(&self.mesh, p, reach)?;
        let mut l = barycentric(&self.mesh.corners(t), p).map(|v| v.max(0.0));
        let s: f64 = l.iter().sum();
        if s > 0.0 {
            l.iter_mut().for_each(|v| *v /= s);
        } else {
            l = [0.25; 4];
        }
        Some(self.interpolate_in(t, &l))
    }

    /// Graded fractions at `p`. When every expression is zero, or `p` is far
    /// from the mesh, the first listed material is used.
    pub fn material_fractions(&self, p: &Vec3) -> FractionSet {
        self.values_near(p)
            .and_then(|v| self.grading.eval(&v))
            .unwrap_or_else(|| FractionSet::single(self.grading.materials()[0]))
    }
}
