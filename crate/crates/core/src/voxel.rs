//! PNG stack export: one RGBA image per z layer of voxel-center samples.
//!
//! Pixel `(col, row)` of layer `k` is the voxel centered at
//! `min + ((col + ½)·rx, (ny − 1 − row + ½)·ry, (k + ½)·rz)`, so row 0 is the
//! top (largest y) as in an image viewed from above. Empty voxels are fully
//! transparent. The material palette travels in `stack_manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{Design, DesignError, DesignNode};
use crate::dither::{assign_material, Mode};
use crate::geom::{cell_count, BBox, Vec3};
use crate::material::{MaterialId, MaterialTable};

pub const MANIFEST_NAME: &str = "stack_manifest.json";

#[derive(Debug, Error)]
pub enum VoxelError {
    #[error("invalid job: {0}")]
    InvalidJob(String),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> VoxelError + '_ {
    move |source| VoxelError::Io { path: path.to_path_buf(), source }
}

/// A sampling region, voxel size and dithering settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleJob {
    region: BBox,
    resolution: Vec3,
    seed: u64,
    mode: Mode,
}

impl SampleJob {
    pub fn new(region: BBox, resolution: Vec3, seed: u64, mode: Mode) -> Result<Self, VoxelError> {
        if resolution.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(VoxelError::InvalidJob(format!(
                "resolution must be positive, got ({}, {}, {})",
                resolution.x, resolution.y, resolution.z
            )));
        }
        let size = region.size();
        if region.is_empty() || size.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(VoxelError::InvalidJob("region must have positive, finite extent on every axis".into()));
        }
        Ok(SampleJob { region, resolution, seed, mode })
    }

    /// Samples the whole design bounding box.
    pub fn for_design(root: &DesignNode, resolution: Vec3, seed: u64, mode: Mode) -> Result<Self, VoxelError> {
        SampleJob::new(root.bounds()?, resolution, seed, mode)
    }

    pub fn region(&self) -> &BBox {
        &self.region
    }

    pub fn resolution(&self) -> Vec3 {
        self.resolution
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Voxel counts per axis (ceiling division of the region).
    pub fn dims(&self) -> [usize; 3] {
        let s = self.region.size();
        [0, 1, 2].map(|a| cell_count(s[a], self.resolution[a]))
    }

    pub fn voxel_count(&self) -> u64 {
        self.dims().iter().map(|&d| d as u64).product()
    }

    #[inline]
    pub fn voxel_center(&self, ix: usize, iy: usize, iz: usize) -> Vec3 {
        self.region.min + Vec3::new(ix as f64 + 0.5, iy as f64 + 0.5, iz as f64 + 0.5).component_mul(&self.resolution)
    }

    /// Materials of layer `iz` in image order (row 0 = largest y).
    pub fn sample_layer(&self, root: &DesignNode, iz: usize) -> Vec<Option<MaterialId>> {
        let [nx, ny, _] = self.dims();
        let mut out = Vec::with_capacity(nx * ny);
        for row in 0..ny {
            let iy = ny - 1 - row;
            for ix in 0..nx {
                let p = self.voxel_center(ix, iy, iz);
                let (_, f) = root.sample(&p);
                out.push(assign_material(&f, [ix as u64, iy as u64, iz as u64], self.seed, self.mode));
            }
        }
        out
    }
}

/// An 8-bit RGBA image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 4]>,
}

impl LayerImage {
    pub fn from_materials(width: usize, height: usize, materials: &[Option<MaterialId>], table: &MaterialTable) -> Self {
        let pixels = materials
            .iter()
            .map(|m| m.and_then(|m| table.color(m)).unwrap_or([0, 0, 0, 0]))
            .collect();
        LayerImage { width, height, pixels }
    }

    pub fn pixel(&self, col: usize, row: usize) -> [u8; 4] {
        self.pixels[row * self.width + col]
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgba);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().expect("writing to memory");
            let raw: Vec<u8> = self.pixels.iter().flatten().copied().collect();
            w.write_image_data(&raw).expect("writing to memory");
        }
        out
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, png::DecodingError> {
        let mut reader = png::Decoder::new(std::io::Cursor::new(bytes)).read_info()?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader.next_frame(&mut buf)?;
        if info.color_type != png::ColorType::Rgba || info.bit_depth != png::BitDepth::Eight {
            return Err(png::DecodingError::LimitsExceeded);
        }
        let pixels = buf[..info.buffer_size()].chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect();
        Ok(LayerImage { width: info.width as usize, height: info.height as usize, pixels })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestMaterial {
    pub id: u16,
    pub name: String,
    pub color: [u8; 4],
}

pub(crate) fn manifest_materials(table: &MaterialTable) -> Vec<ManifestMaterial> {
    table.iter().map(|m| ManifestMaterial { id: m.id.0, name: m.name.clone(), color: m.color }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackManifest {
    pub region_min: [f64; 3],
    pub region_max: [f64; 3],
    pub resolution: [f64; 3],
    pub seed: u64,
    pub mode: Mode,
    pub width: usize,
    pub height: usize,
    pub layer_count: usize,
    pub layers: Vec<String>,
    pub materials: Vec<ManifestMaterial>,
    /// Voxels per material name, over the whole stack.
    pub voxel_counts: BTreeMap<String, u64>,
}

pub fn layer_name(iz: usize) -> String {
    format!("layer_{iz:05}.png")
}

/// Renders every layer in memory.
pub fn render_stack(design: &Design, job: &SampleJob) -> Vec<LayerImage> {
    let [nx, ny, nz] = job.dims();
    (0..nz)
        .into_par_iter()
        .map(|iz| LayerImage::from_materials(nx, ny, &job.sample_layer(&design.root, iz), &design.materials))
        .collect()
}

/// Writes `layer_00000.png …` and `stack_manifest.json` into `out_dir`
/// using up to `workers` threads (0 = all cores). Output bytes do not depend
/// on the worker count.
pub fn compile_stack(design: &Design, job: &SampleJob, out_dir: &Path, workers: usize) -> Result<StackManifest, VoxelError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let [nx, ny, nz] = job.dims();
    let ncolors = design.materials.len();
    let per_layer: Vec<Vec<u64>> = crate::workers::run(workers, || {
        (0..nz)
            .into_par_iter()
            .map(|iz| {
                let mats = job.sample_layer(&design.root, iz);
                let mut counts = vec![0u64; ncolors];
                for m in mats.iter().flatten() {
                    counts[m.0 as usize] += 1;
                }
                let img = LayerImage::from_materials(nx, ny, &mats, &design.materials);
                let path = out_dir.join(layer_name(iz));
                std::fs::write(&path, img.encode_png()).map_err(io_err(&path))?;
                Ok(counts)
            })
            .collect::<Result<Vec<_>, VoxelError>>()
    })?;
    let mut voxel_counts = BTreeMap::new();
    for m in design.materials.iter() {
        let c: u64 = per_layer.iter().map(|l| l[m.id.0 as usize]).sum();
        if c > 0 {
            voxel_counts.insert(m.name.clone(), c);
        }
    }
    let r = job.region();
    let manifest = StackManifest {
        region_min: [r.min.x, r.min.y, r.min.z],
        region_max: [r.max.x, r.max.y, r.max.z],
        resolution: [job.resolution.x, job.resolution.y, job.resolution.z],
        seed: job.seed,
        mode: job.mode,
        width: nx,
        height: ny,
        layer_count: nz,
        layers: (0..nz).map(layer_name).collect(),
        materials: manifest_materials(&design.materials),
        voxel_counts,
    };
    let path = out_dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            _ => Err(format!("unknown axis '{s}' (expected x, y or z)")),
        }
    }
}

impl Axis {
    /// In-image horizontal and vertical world axes.
    fn plane(self) -> (usize, usize, usize) {
        match self {
            Axis::X => (1, 2, 0),
            Axis::Y => (0, 2, 1),
            Axis::Z => (0, 1, 2),
        }
    }
}

/// One planar slice through `region` at `axis = at`, pixel size `res`.
/// The vertical image axis grows upward (row 0 is the largest coordinate).
pub fn render_slice(design: &Design, region: &BBox, axis: Axis, at: f64, res: f64, seed: u64, mode: Mode) -> Result<LayerImage, VoxelError> {
    if !(res > 0.0) {
        return Err(VoxelError::InvalidJob(format!("resolution must be positive, got {res}")));
    }
    let (u, v, w) = axis.plane();
    let size = region.size();
    let (nu, nv) = (cell_count(size[u], res), cell_count(size[v], res));
    let rows: Vec<Vec<Option<MaterialId>>> = (0..nv)
        .into_par_iter()
        .map(|row| {
            let iv = nv - 1 - row;
            (0..nu)
                .map(|iu| {
                    let mut p = Vec3::zeros();
                    p[u] = region.min[u] + (iu as f64 + 0.5) * res;
                    p[v] = region.min[v] + (iv as f64 + 0.5) * res;
                    p[w] = at;
                    let (_, f) = design.root.sample(&p);
                    assign_material(&f, [iu as u64, iv as u64, at.to_bits()], seed, mode)
                })
                .collect()
        })
        .collect();
    let flat: Vec<Option<MaterialId>> = rows.into_iter().flatten().collect();
    Ok(LayerImage::from_materials(nu, nv, &flat, &design.materials))
}
