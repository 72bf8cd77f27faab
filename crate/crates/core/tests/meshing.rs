mod common;

use std::collections::HashMap;

use vcad_core::meshing::{export_meshes, marching_cubes, sample_segmented_grids, segment_meshes, MeshManifest, SegmentationSpec};
use vcad_core::surface::TriangleMesh;

fn undirected_edge_uses(m: &TriangleMesh) -> HashMap<(u32, u32), usize> {
    let mut uses = HashMap::new();
    for t in &m.triangles {
        for i in 0..3 {
            let (a, b) = (t[i], t[(i + 1) % 3]);
            *uses.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    uses
}

#[test]
fn sphere_vertices_lie_on_radius() {
    let d = common::sphere(10.0);
    let red = d.materials.id("red").unwrap();
    let spec = SegmentationSpec::new(1, red, 0.5).unwrap();
    let (_, meshes) = segment_meshes(&d, &spec).unwrap();
    let m = &meshes[0];
    assert!(m.len() > 1000);
    let worst = m.vertices.iter().map(|v| (v.norm() - 10.0).abs()).fold(0.0, f64::max);
    assert!(worst <= 0.5, "worst {worst}");
    assert!(m.is_closed_manifold());
    assert!(undirected_edge_uses(m).values().all(|&n| n == 2));
    assert_eq!(m.euler_characteristic(), 2);
    assert!((0..m.len()).all(|t| m.area_normal(t).norm() > 0.0));
    let want = 4.0 / 3.0 * std::f64::consts::PI * 1000.0;
    assert!((m.volume() - want).abs() / want < 0.01, "{}", m.volume());
}

#[test]
fn cube_is_genus_zero() {
    let d = common::cube(10.0);
    let spec = SegmentationSpec::new(1, d.materials.id("red").unwrap(), 1.0).unwrap();
    let (_, meshes) = segment_meshes(&d, &spec).unwrap();
    let m = &meshes[0];
    assert!(m.is_closed_manifold());
    assert_eq!(m.euler_characteristic(), 2);
    assert!(undirected_edge_uses(m).values().all(|&n| n == 2));
}

#[test]
fn single_segment_grid_is_plain_sdf() {
    let d = common::gradient_bar();
    let spec = SegmentationSpec::new(1, d.materials.id("red").unwrap(), 0.5).unwrap();
    let g = sample_segmented_grids(&d, &spec).unwrap();
    let grid = g.grid(0);
    let [nx, ny, nz] = grid.dims;
    for k in 1..nz - 1 {
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let want = d.root.sdf(&grid.node(i, j, k));
                let got = grid.values[grid.index(i, j, k)] as f64;
                assert_eq!(got <= 0.0, want <= 0.0);
                assert!((got - want).abs() < 1e-5);
            }
        }
    }
}

#[test]
fn two_segments_split_the_bar_in_halves() {
    let d = common::gradient_bar();
    let red = d.materials.id("red").unwrap();
    let spec = SegmentationSpec::new(2, red, 0.5).unwrap();
    let g = sample_segmented_grids(&d, &spec).unwrap();
    let (a, b) = (g.grid(0), g.grid(1));
    for n in 0..a.values.len() {
        let p = a.node(n % a.dims[0], (n / a.dims[0]) % a.dims[1], n / (a.dims[0] * a.dims[1]));
        let inside = d.root.sdf(&p) <= 0.0;
        // red fraction is x/15 + 0.5, so segment 1 is x >= 0
        assert_eq!(a.values[n] <= 0.0, inside && p.x < 0.0, "{p:?}");
        assert_eq!(b.values[n] <= 0.0, inside && p.x >= 0.0, "{p:?}");
    }
}

#[test]
fn four_segments_partition_the_bar() {
    let d = common::gradient_bar();
    let dir = tempfile::tempdir().unwrap();
    let spec = SegmentationSpec::new(4, d.materials.id("red").unwrap(), 0.25).unwrap();
    let manifest = export_meshes(&d, &spec, dir.path(), 2).unwrap();
    let summed: usize = manifest.segments.iter().map(|s| s.interior_voxels).sum();
    assert_eq!(summed, manifest.interior_voxels);
    assert!((summed as f64 * 0.25f64.powi(3) - 750.0).abs() < 1e-9);
    for s in &manifest.segments {
        let bytes = std::fs::read(dir.path().join(&s.file)).unwrap();
        let m = TriangleMesh::from_stl_bytes(&bytes).unwrap();
        assert_eq!(m.len(), s.triangles);
        assert!(m.is_closed_manifold(), "segment {}", s.index);
    }
    let text = std::fs::read_to_string(dir.path().join("mesh_manifest.json")).unwrap();
    let back: MeshManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(back, manifest);
    assert_eq!(back.segments[3].range, [0.75, 1.0]);
}

#[test]
fn stl_bytes_do_not_depend_on_workers() {
    let d = common::gradient_bar();
    let spec = SegmentationSpec::new(3, d.materials.id("blue").unwrap(), 0.5).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    export_meshes(&d, &spec, a.path(), 1).unwrap();
    export_meshes(&d, &spec, b.path(), 4).unwrap();
    for i in 0..3 {
        let name = format!("segment_{i}.stl");
        assert_eq!(std::fs::read(a.path().join(&name)).unwrap(), std::fs::read(b.path().join(&name)).unwrap());
    }
}

#[test]
fn empty_design_region_gives_empty_mesh() {
    let d = common::sphere(1.0);
    let spec = SegmentationSpec::new(2, d.materials.id("blue").unwrap(), 0.25).unwrap();
    let (g, meshes) = segment_meshes(&d, &spec).unwrap();
    // all red, so the blue fraction is 0 everywhere and segment 1 is empty
    assert_eq!(g.interior_count(1), 0);
    assert!(meshes[1].is_empty());
    assert!(marching_cubes(&g.grid(1)).is_empty());
    assert!(!meshes[0].is_empty());
}
