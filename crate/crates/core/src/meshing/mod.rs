//! Fraction-segmented surface meshes for slicers.
//!
//! One sampling pass records the signed distance and the reference-material
//! fraction of every voxel. Segment `i` covers fractions in
//! `[i/N, (i+1)/N)` (the last range is closed). Its grid keeps the real
//! distance at voxels of that segment and at exterior voxels and puts the
//! exterior sentinel `+2·res` at interior voxels of other segments, so the
//! segments partition the interior voxels exactly. Each grid is padded with
//! one exterior layer and extracted with marching cubes.

mod mc;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{Design, DesignError};
use crate::geom::{cell_count, BBox, Vec3};
use crate::material::MaterialId;
use crate::surface::TriangleMesh;
use crate::voxel::{io_err, VoxelError};

pub use mc::{marching_cubes, DenseGrid};

pub const MANIFEST_NAME: &str = "mesh_manifest.json";

#[derive(Debug, Error)]
pub enum MeshingError {
    #[error("invalid segmentation: {0}")]
    Spec(String),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Io(#[from] VoxelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationSpec {
    segments: usize,
    reference: MaterialId,
    resolution: f64,
}

impl SegmentationSpec {
    pub fn new(segments: usize, reference: MaterialId, resolution: f64) -> Result<Self, MeshingError> {
        if segments == 0 || segments > u16::MAX as usize {
            return Err(MeshingError::Spec(format!("segment count must be in 1..=65535, got {segments}")));
        }
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(MeshingError::Spec(format!("resolution must be positive, got {resolution}")));
        }
        Ok(SegmentationSpec { segments, reference, resolution })
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn reference(&self) -> MaterialId {
        self.reference
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Fraction range of segment `i`; the upper bound is exclusive except
    /// for the last segment.
    pub fn range(&self, i: usize) -> (f64, f64) {
        let n = self.segments as f64;
        (i as f64 / n, (i + 1) as f64 / n)
    }

    pub fn segment_of(&self, fraction: f64) -> usize {
        let s = (fraction.clamp(0.0, 1.0) * self.segments as f64).floor() as usize;
        s.min(self.segments - 1)
    }
}

const EXTERIOR: u16 = u16::MAX;

/// Output of the shared sampling pass.
#[derive(Debug, Clone)]
pub struct SegmentedGrids {
    spec: SegmentationSpec,
    /// Position of padded node `(0, 0, 0)`.
    origin: Vec3,
    /// Padded node counts (voxels + 2).
    dims: [usize; 3],
    sdf: Vec<f32>,
    segment: Vec<u16>,
}

impl SegmentedGrids {
    pub fn spec(&self) -> &SegmentationSpec {
        &self.spec
    }

    /// Padded node counts per axis.
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn sentinel(&self) -> f32 {
        (2.0 * self.spec.resolution) as f32
    }

    /// Segment holding padded node `n`, or `None` outside the design.
    pub fn segment_at(&self, n: usize) -> Option<usize> {
        (self.segment[n] != EXTERIOR).then(|| self.segment[n] as usize)
    }

    /// Interior voxel count of segment `i`.
    pub fn interior_count(&self, i: usize) -> usize {
        self.segment.iter().filter(|&&s| s as usize == i).count()
    }

    /// Interior voxel count of the whole design.
    pub fn total_interior(&self) -> usize {
        self.segment.iter().filter(|&&s| s != EXTERIOR).count()
    }

    /// Scalar grid of segment `i`.
    pub fn grid(&self, i: usize) -> DenseGrid {
        let sentinel = self.sentinel();
        let values = self
            .sdf
            .iter()
            .zip(&self.segment)
            .map(|(&d, &s)| if s == EXTERIOR || s as usize == i { d } else { sentinel })
            .collect();
        DenseGrid { origin: self.origin, spacing: self.spec.resolution, dims: self.dims, values }
    }
}

/// Samples every voxel center of the design bounds once.
pub fn sample_segmented_grids(design: &Design, spec: &SegmentationSpec) -> Result<SegmentedGrids, MeshingError> {
    let bounds = design.root.bounds()?;
    sample_region(design, spec, &bounds)
}

fn sample_region(design: &Design, spec: &SegmentationSpec, bounds: &BBox) -> Result<SegmentedGrids, MeshingError> {
    let res = spec.resolution;
    let size = bounds.size();
    let voxels = [0, 1, 2].map(|a| cell_count(size[a], res));
    let dims = voxels.map(|n| n + 2);
    let origin = bounds.min - Vec3::repeat(0.5 * res);
    let sentinel = (2.0 * res) as f32;
    let slab = dims[0] * dims[1];
    let mut sdf = vec![sentinel; slab * dims[2]];
    let mut segment = vec![EXTERIOR; slab * dims[2]];
    sdf.par_chunks_mut(slab).zip(segment.par_chunks_mut(slab)).enumerate().for_each(|(k, (ds, ss))| {
        if k == 0 || k == dims[2] - 1 {
            return;
        }
        for j in 1..dims[1] - 1 {
            for i in 1..dims[0] - 1 {
                let p = origin + Vec3::new(i as f64, j as f64, k as f64) * res;
                let (d, f) = design.root.sample(&p);
                let n = i + dims[0] * j;
                if d <= 0.0 {
                    ss[n] = spec.segment_of(f.get(spec.reference)) as u16;
                    ds[n] = (d as f32).min(0.0);
                } else {
                    ds[n] = (d as f32).max(f32::MIN_POSITIVE);
                }
            }
        }
    });
    Ok(SegmentedGrids { spec: *spec, origin, dims, sdf, segment })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub index: usize,
    /// `[lower, upper)` reference fraction; the last range includes 1.
    pub range: [f64; 2],
    pub file: String,
    pub triangles: usize,
    pub vertices: usize,
    pub interior_voxels: usize,
    /// Range midpoint, as a starting infill density for the slicer.
    pub suggested_infill_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshManifest {
    pub reference_material: String,
    pub resolution: f64,
    pub region_min: [f64; 3],
    pub region_max: [f64; 3],
    pub interior_voxels: usize,
    pub segments: Vec<SegmentEntry>,
}

/// Samples once and extracts every segment surface in parallel.
pub fn segment_meshes(design: &Design, spec: &SegmentationSpec) -> Result<(SegmentedGrids, Vec<TriangleMesh>), MeshingError> {
    let grids = sample_segmented_grids(design, spec)?;
    let meshes = (0..spec.segments).into_par_iter().map(|i| marching_cubes(&grids.grid(i))).collect();
    Ok((grids, meshes))
}

pub fn segment_file(i: usize) -> String {
    format!("segment_{i}.stl")
}

/// Writes `segment_<i>.stl` files and `mesh_manifest.json` into `out_dir`
/// using up to `workers` threads (0 = all cores).
pub fn export_meshes(design: &Design, spec: &SegmentationSpec, out_dir: &Path, workers: usize) -> Result<MeshManifest, MeshingError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir)).map_err(MeshingError::Io)?;
    let (grids, meshes) = crate::workers::run(workers, || segment_meshes(design, spec))?;
    let mut segments = Vec::with_capacity(meshes.len());
    for (i, mesh) in meshes.iter().enumerate() {
        let file = segment_file(i);
        let path = out_dir.join(&file);
        std::fs::write(&path, mesh.to_stl_bytes()).map_err(io_err(&path))?;
        let (lo, hi) = spec.range(i);
        segments.push(SegmentEntry {
            index: i,
            range: [lo, hi],
            file,
            triangles: mesh.len(),
            vertices: mesh.vertices.len(),
            interior_voxels: grids.interior_count(i),
            suggested_infill_density: 0.5 * (lo + hi),
        });
    }
    let bounds = design.root.bounds()?;
    let manifest = MeshManifest {
        reference_material: design.materials.name(spec.reference).unwrap_or("?").to_string(),
        resolution: spec.resolution,
        region_min: [bounds.min.x, bounds.min.y, bounds.min.z],
        region_max: [bounds.max.x, bounds.max.y, bounds.max.z],
        interior_voxels: grids.total_interior(),
        segments,
    };
    let path = out_dir.join(MANIFEST_NAME);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes")).map_err(io_err(&path))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_partition_unit_interval() {
        let s = SegmentationSpec::new(4, MaterialId(0), 1.0).unwrap();
        assert_eq!(s.segment_of(0.0), 0);
        assert_eq!(s.segment_of(0.25), 1);
        assert_eq!(s.segment_of(0.9999), 3);
        assert_eq!(s.segment_of(1.0), 3);
        assert_eq!(s.range(3), (0.75, 1.0));
        assert!(SegmentationSpec::new(0, MaterialId(0), 1.0).is_err());
        assert!(SegmentationSpec::new(2, MaterialId(0), 0.0).is_err());
    }
}
