//! Fully resolved jobs and the manifests that record them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vcad_core::design::Design;
use vcad_core::dither::Mode;
use vcad_core::fea::{export_bricks, export_tets, ExportOptions, ExportReport, SizingField};
use vcad_core::geom::{BBox, Vec3};
use vcad_core::inp::{write_inp, MaterialCard};
use vcad_core::meshing::{export_meshes, SegmentationSpec};
use vcad_core::voxel::{compile_stack, render_slice, Axis, SampleJob};
use vcad_core::workers;

use crate::error::CliError;

/// Name of the job manifest inside directory outputs. File outputs get
/// `<file>.job.json` next to them.
pub const JOB_MANIFEST: &str = "job_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Mesher {
    Bricks { resolution: f64 },
    Tets { min_cell: f64, max_cell: f64, sizing: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Card {
    pub name: String,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    CompileStack {
        design: PathBuf,
        resolution: [f64; 3],
        region: [f64; 6],
        seed: u64,
        mode: Mode,
        out: PathBuf,
    },
    ExportFea {
        design: PathBuf,
        mesher: Mesher,
        seed: u64,
        mode: Mode,
        element_cap: u64,
        cards: Vec<Card>,
        out: PathBuf,
    },
    ExportMesh {
        design: PathBuf,
        segments: usize,
        reference_material: String,
        resolution: f64,
        out: PathBuf,
    },
    Preview {
        design: PathBuf,
        axis: Axis,
        at: f64,
        resolution: f64,
        region: [f64; 6],
        seed: u64,
        mode: Mode,
        out: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobManifest {
    pub vcadc_version: String,
    pub design_sha256: String,
    pub workers: usize,
    #[serde(flatten)]
    pub job: Job,
}

pub fn region_array(b: &BBox) -> [f64; 6] {
    [b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z]
}

pub fn region_box(r: &[f64; 6]) -> Result<BBox, CliError> {
    if r.iter().any(|v| !v.is_finite()) || (0..3).any(|a| r[a] >= r[a + 3]) {
        return Err(CliError::parse(format!("region {r:?} must have finite min < max on every axis")));
    }
    Ok(BBox::new(Vec3::new(r[0], r[1], r[2]), Vec3::new(r[3], r[4], r[5])))
}

pub fn design_hash(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

pub fn load_design(path: &Path) -> Result<Design, CliError> {
    Ok(Design::load(path)?)
}

impl Job {
    pub fn design(&self) -> &Path {
        match self {
            Job::CompileStack { design, .. }
            | Job::ExportFea { design, .. }
            | Job::ExportMesh { design, .. }
            | Job::Preview { design, .. } => design,
        }
    }

    pub fn set_out(&mut self, new: PathBuf) {
        match self {
            Job::CompileStack { out, .. } | Job::ExportFea { out, .. } | Job::ExportMesh { out, .. } | Job::Preview { out, .. } => *out = new,
        }
    }

    pub fn manifest_path(&self) -> PathBuf {
        match self {
            Job::CompileStack { out, .. } | Job::ExportMesh { out, .. } => out.join(JOB_MANIFEST),
            Job::ExportFea { out, .. } | Job::Preview { out, .. } => {
                let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
                name.push(".job.json");
                out.with_file_name(name)
            }
        }
    }

    /// Checks everything that can be checked without sampling.
    pub fn validate(&self, design: &Design) -> Result<(), CliError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::parse(format!("{name} must be a positive number, got {v}")))
            }
        };
        match self {
            Job::CompileStack { resolution, region, .. } => {
                region_box(region)?;
                resolution.iter().try_for_each(|r| positive("--res", *r))
            }
            Job::ExportFea { mesher, cards, .. } => {
                match mesher {
                    Mesher::Bricks { resolution } => positive("--res", *resolution)?,
                    Mesher::Tets { .. } => {
                        self.sizing()?;
                    }
                }
                for c in cards {
                    design.materials.id(&c.name).map_err(|e| CliError::parse(format!("--card: {e}")))?;
                    positive("Young's modulus", c.youngs_modulus)?;
                    if !(c.poisson_ratio > -1.0 && c.poisson_ratio <= 0.5) {
                        return Err(CliError::parse(format!("Poisson ratio {} outside (-1, 0.5]", c.poisson_ratio)));
                    }
                }
                Ok(())
            }
            Job::ExportMesh { segments, reference_material, resolution, .. } => {
                let id = design.materials.id(reference_material).map_err(|e| CliError::parse(format!("--ref-material: {e}")))?;
                SegmentationSpec::new(*segments, id, *resolution)?;
                Ok(())
            }
            Job::Preview { resolution, region, at, .. } => {
                region_box(region)?;
                positive("--res", *resolution)?;
                if at.is_finite() {
                    Ok(())
                } else {
                    Err(CliError::parse("--at must be finite"))
                }
            }
        }
    }

    fn sizing(&self) -> Result<SizingField, CliError> {
        match self {
            Job::ExportFea { mesher: Mesher::Tets { min_cell, max_cell, sizing }, .. } => Ok(match sizing {
                Some(src) => SizingField::with_expression(*min_cell, *max_cell, src)?,
                None => SizingField::new(*min_cell, *max_cell)?,
            }),
            _ => unreachable!("sizing only applies to tet exports"),
        }
    }

    /// Runs the job and returns a one-line summary.
    pub fn execute(&self, design: &Design, worker_count: usize) -> Result<String, CliError> {
        match self {
            Job::CompileStack { resolution, region, seed, mode, out, .. } => {
                let job = SampleJob::new(region_box(region)?, Vec3::from(*resolution), *seed, *mode)?;
                let m = compile_stack(design, &job, out, worker_count)?;
                Ok(format!("wrote {} layers of {}x{} to {}", m.layer_count, m.width, m.height, out.display()))
            }
            Job::ExportFea { mesher, seed, mode, element_cap, cards, out, .. } => {
                let opts = ExportOptions { seed: *seed, mode: *mode, element_cap: *element_cap };
                let (mesh, report): (_, ExportReport) = match mesher {
                    Mesher::Bricks { resolution } => workers::run(worker_count, || export_bricks(design, *resolution, &opts))?,
                    Mesher::Tets { .. } => {
                        let sizing = self.sizing()?;
                        workers::run(worker_count, || export_tets(design, &sizing, &opts))?
                    }
                };
                let cards: Vec<MaterialCard> = cards.iter().map(|c| MaterialCard::new(&c.name, c.youngs_modulus, c.poisson_ratio)).collect();
                let inp = mesh.to_inp(&design.materials, &cards);
                write_file(out, write_inp(&inp).as_bytes())?;
                log::info!("{}", serde_json::to_string(&report).expect("report serializes"));
                Ok(format!("wrote {} elements on {} nodes to {}", report.elements, report.nodes, out.display()))
            }
            Job::ExportMesh { segments, reference_material, resolution, out, .. } => {
                let id = design.materials.id(reference_material).map_err(|e| CliError::parse(e.to_string()))?;
                let spec = SegmentationSpec::new(*segments, id, *resolution)?;
                let m = export_meshes(design, &spec, out, worker_count)?;
                let tris: usize = m.segments.iter().map(|s| s.triangles).sum();
                Ok(format!("wrote {} segment meshes ({tris} triangles) to {}", m.segments.len(), out.display()))
            }
            Job::Preview { axis, at, resolution, region, seed, mode, out, .. } => {
                let region = region_box(region)?;
                let img = workers::run(worker_count, || render_slice(design, &region, *axis, *at, *resolution, *seed, *mode))?;
                write_file(out, &img.encode_png())?;
                Ok(format!("wrote {}x{} slice to {}", img.width, img.height, out.display()))
            }
        }
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

impl JobManifest {
    pub fn write(&self) -> Result<PathBuf, CliError> {
        let path = self.job.manifest_path();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_file(&path, text.as_bytes())?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<JobManifest, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
    }
}
