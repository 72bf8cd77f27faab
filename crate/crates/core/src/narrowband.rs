//! Sparse signed-distance grid around a triangle surface.
//!
//! Nodes are grouped into 8³ blocks. Blocks within reach of a triangle store
//! exact signed distances clamped to the band; every other block stores only
//! its sign, found once per connected region of empty blocks. Queries are
//! trilinear and continuous everywhere, including outside the grid.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::geom::{cell_count, BBox, Vec3};
use crate::surface::{SignedDistance, TriangleMesh};

const B: usize = 8;
const BLOCK_LEN: usize = B * B * B;
const EMPTY_INSIDE: u32 = u32::MAX - 1;
const EMPTY_OUTSIDE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct NarrowBandGrid {
    origin: Vec3,
    cell: f64,
    band: f64,
    dims: [usize; 3],
    bdims: [usize; 3],
    block_index: Vec<u32>,
    blocks: Vec<Box<[f32; BLOCK_LEN]>>,
}

impl NarrowBandGrid {
    pub const DEFAULT_BAND_CELLS: usize = 3;

    /// Samples `mesh` at spacing `cell`; distances are clamped to
    /// `±band_cells·cell`.
    pub fn from_mesh(mesh: &TriangleMesh, cell: f64, band_cells: usize) -> Self {
        assert!(cell > 0.0, "grid cell must be positive");
        let band = band_cells.max(1) as f64 * cell;
        let region = mesh.bounds().expanded(band + 2.0 * cell);
        let size = region.size();
        let dims = [0, 1, 2].map(|a| cell_count(size[a], cell) + 1);
        let bdims = dims.map(|d| d.div_ceil(B));
        let nblocks = bdims[0] * bdims[1] * bdims[2];
        let origin = region.min;

        let mut touched = vec![false; nblocks];
        let reach = band + cell;
        for t in 0..mesh.len() {
            let tb = BBox::from_points(&mesh.corners(t)).expanded(reach);
            let lo = [0, 1, 2].map(|a| (((tb.min[a] - origin[a]) / cell).floor().max(0.0) as usize) / B);
            let hi = [0, 1, 2].map(|a| ((((tb.max[a] - origin[a]) / cell).ceil().max(0.0) as usize) / B).min(bdims[a] - 1));
            for bz in lo[2]..=hi[2] {
                for by in lo[1]..=hi[1] {
                    for bx in lo[0]..=hi[0] {
                        touched[bx + bdims[0] * (by + bdims[1] * bz)] = true;
                    }
                }
            }
        }

        let active: Vec<usize> = (0..nblocks).filter(|&b| touched[b]).collect();
        let sd = SignedDistance::new(mesh);
        let blocks: Vec<Box<[f32; BLOCK_LEN]>> = active
            .par_iter()
            .map(|&b| {
                let (bx, by, bz) = (b % bdims[0], (b / bdims[0]) % bdims[1], b / (bdims[0] * bdims[1]));
                let mut data = Box::new([0f32; BLOCK_LEN]);
                for (k, v) in data.iter_mut().enumerate() {
                    let ix = bx * B + k % B;
                    let iy = by * B + (k / B) % B;
                    let iz = bz * B + k / (B * B);
                    let p = origin + Vec3::new(ix as f64, iy as f64, iz as f64) * cell;
                    *v = sd.signed(&p).clamp(-band, band) as f32;
                }
                data
            })
            .collect();

        let mut block_index = vec![u32::MAX - 2; nblocks];
        for (i, &b) in active.iter().enumerate() {
            block_index[b] = i as u32;
        }
        let mut grid = NarrowBandGrid { origin, cell, band, dims, bdims, block_index, blocks };
        grid.fill_empty_signs(mesh);
        grid
    }

    /// Assigns a sign to each connected region of surface-free blocks. No
    /// surface crosses such a region, so one winding-number probe decides it.
    fn fill_empty_signs(&mut self, mesh: &TriangleMesh) {
        let bd = self.bdims;
        let unset = u32::MAX - 2;
        let mut queue = VecDeque::new();
        for seed in 0..self.block_index.len() {
            if self.block_index[seed] != unset {
                continue;
            }
            let mut component = vec![seed];
            let mut on_border = false;
            self.block_index[seed] = EMPTY_OUTSIDE;
            queue.push_back(seed);
            while let Some(b) = queue.pop_front() {
                let c = [b % bd[0], (b / bd[0]) % bd[1], b / (bd[0] * bd[1])];
                for axis in 0..3 {
                    if c[axis] == 0 || c[axis] + 1 == bd[axis] {
                        on_border = true;
                    }
                    for step in [-1i64, 1] {
                        let n = c[axis] as i64 + step;
                        if n < 0 || n >= bd[axis] as i64 {
                            continue;
                        }
                        let mut nc = c;
                        nc[axis] = n as usize;
                        let nb = nc[0] + bd[0] * (nc[1] + bd[1] * nc[2]);
                        if self.block_index[nb] == unset {
                            self.block_index[nb] = EMPTY_OUTSIDE;
                            component.push(nb);
                            queue.push_back(nb);
                        }
                    }
                }
            }
            let inside = !on_border && {
                let b = seed;
                let c = [b % bd[0], (b / bd[0]) % bd[1], b / (bd[0] * bd[1])];
                let p = self.origin + Vec3::new(c[0] as f64 + 0.5, c[1] as f64 + 0.5, c[2] as f64 + 0.5) * (B as f64 * self.cell);
                mesh.winding_number(&p) > 0.5
            };
            if inside {
                for b in component {
                    self.block_index[b] = EMPTY_INSIDE;
                }
            }
        }
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    pub fn band(&self) -> f64 {
        self.band
    }

    /// Node counts per axis.
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn bounds(&self) -> BBox {
        let ext = Vec3::new((self.dims[0] - 1) as f64, (self.dims[1] - 1) as f64, (self.dims[2] - 1) as f64) * self.cell;
        BBox::new(self.origin, self.origin + ext)
    }

    /// Number of blocks holding explicit distances.
    pub fn allocated_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Stored value at node `(ix, iy, iz)`.
    #[inline]
    pub fn node(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        let b = ix / B + self.bdims[0] * (iy / B + self.bdims[1] * (iz / B));
        match self.block_index[b] {
            EMPTY_INSIDE => -self.band,
            EMPTY_OUTSIDE => self.band,
            i => self.blocks[i as usize][ix % B + B * (iy % B) + B * B * (iz % B)] as f64,
        }
    }

    /// Trilinear signed distance. Outside the grid the band value grows with
    /// the distance to the grid box.
    pub fn sample(&self, p: &Vec3) -> f64 {
        let bounds = self.bounds();
        let outside = bounds.distance(p);
        if outside > 0.0 {
            return self.band + outside;
        }
        let u = (p - self.origin) / self.cell;
        let mut i = [0usize; 3];
        let mut t = [0f64; 3];
        for a in 0..3 {
            let max = (self.dims[a] - 2) as f64;
            let f = u[a].floor().clamp(0.0, max);
            i[a] = f as usize;
            t[a] = (u[a] - f).clamp(0.0, 1.0);
        }
        let v = |dx: usize, dy: usize, dz: usize| self.node(i[0] + dx, i[1] + dy, i[2] + dz);
        let lerp = |a: f64, b: f64, s: f64| a + (b - a) * s;
        let x00 = lerp(v(0, 0, 0), v(1, 0, 0), t[0]);
        let x10 = lerp(v(0, 1, 0), v(1, 1, 0), t[0]);
        let x01 = lerp(v(0, 0, 1), v(1, 0, 1), t[0]);
        let x11 = lerp(v(0, 1, 1), v(1, 1, 1), t[0]);
        lerp(lerp(x00, x10, t[1]), lerp(x01, x11, t[1]), t[2])
    }
}
