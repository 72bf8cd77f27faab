//! Structured C3D8R export.

use rayon::prelude::*;

use super::{ExportOptions, ExportReport, FeaError, FeaMesh};
use crate::design::Design;
use crate::dither::assign_material;
use crate::geom::{cell_count, Vec3};
use crate::inp::ElementType;
use crate::material::MaterialId;

pub const DEFAULT_ELEMENT_CAP: u64 = 50_000_000;

/// Corner offsets in C3D8R order: bottom face counter-clockwise seen from
/// +z, then the top face.
const CORNERS: [[usize; 3]; 8] = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]];

/// Grid of `res`-sized cubes over the design bounds; a cube becomes an
/// element when `sdf` at its center is `≤ 0`.
pub fn export_bricks(design: &Design, res: f64, opts: &ExportOptions) -> Result<(FeaMesh, ExportReport), FeaError> {
    if !(res > 0.0) || !res.is_finite() {
        return Err(FeaError::Resolution(res));
    }
    let bounds = design.root.bounds()?;
    let size = bounds.size();
    let [nx, ny, nz] = [0, 1, 2].map(|a| cell_count(size[a], res));
    let cells = nx as u64 * ny as u64 * nz as u64;
    if cells > opts.element_cap {
        return Err(FeaError::TooManyElements { count: cells, cap: opts.element_cap });
    }
    let origin = bounds.min;
    let center = |i: usize, j: usize, k: usize| origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * res;

    let kept: Vec<[usize; 3]> = (0..nz)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut layer = Vec::new();
            for j in 0..ny {
                for i in 0..nx {
                    if design.root.sdf(&center(i, j, k)) <= 0.0 {
                        layer.push([i, j, k]);
                    }
                }
            }
            layer
        })
        .collect();

    let (sx, sy) = (nx + 1, ny + 1);
    let mut node_of = vec![u32::MAX; sx * sy * (nz + 1)];
    let mut nodes = Vec::new();
    let mut connectivity = Vec::with_capacity(kept.len() * 8);
    for c in &kept {
        for off in CORNERS {
            let (i, j, k) = (c[0] + off[0], c[1] + off[1], c[2] + off[2]);
            let slot = &mut node_of[i + sx * (j + sy * k)];
            if *slot == u32::MAX {
                *slot = nodes.len() as u32;
                nodes.push(origin + Vec3::new(i as f64, j as f64, k as f64) * res);
            }
            connectivity.push(*slot);
        }
    }

    let fallback = design.root.fraction_materials().into_iter().next().unwrap_or(MaterialId(0));
    let assigned: Vec<Option<MaterialId>> = kept
        .par_iter()
        .enumerate()
        .map(|(e, c)| {
            let f = design.root.material_fractions(&center(c[0], c[1], c[2]));
            assign_material(&f, [e as u64, 0, 0], opts.seed, opts.mode)
        })
        .collect();
    let unassigned = assigned.iter().filter(|m| m.is_none()).count();
    let materials = assigned.into_iter().map(|m| m.unwrap_or(fallback)).collect();

    let mesh = FeaMesh { kind: ElementType::C3D8R, nodes, connectivity, materials };
    let report = ExportReport { elements: mesh.len(), nodes: mesh.nodes.len(), unassigned, ..ExportReport::default() };
    Ok((mesh, report))
}
