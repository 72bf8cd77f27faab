mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vcad_core::design::Design;
use vcad_core::geom::{vec3, Vec3};
use vcad_core::inp::write_inp;
use vcad_core::material::MaterialId;
use vcad_core::simfield::{locate_brute_force, parse_results_csv, AabbTree, SimulationField, TetMesh};

fn random_mesh(seed: u64) -> vcad_core::inp::InpMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = [rng.random_range(2..6), rng.random_range(2..6), rng.random_range(2..6)];
    let size = vec3(rng.random_range(1.0..20.0), rng.random_range(1.0..20.0), rng.random_range(1.0..20.0));
    common::kuhn_grid(n, 0.3, seed, |u| u.component_mul(&size) - size / 2.0)
}

#[test]
fn affine_fields_are_reproduced() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for seed in 0..10 {
        let inp = random_mesh(seed);
        let mesh = TetMesh::from_inp(&inp).unwrap();
        let c: [f64; 12] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
        let affine = |p: &Vec3| [0, 1, 2].map(|k| c[4 * k] + c[4 * k + 1] * p.x + c[4 * k + 2] * p.y + c[4 * k + 3] * p.z);
        let csv = common::results_csv(&inp, affine);
        let results = parse_results_csv(csv.as_bytes(), mesh.node_ids()).unwrap();
        let bounds = mesh.bounds();
        let field = SimulationField::new(mesh, results, &["dx", "dy"], vec![MaterialId(0), MaterialId(1)], true, 0.5).unwrap();
        for _ in 0..100 {
            let p = bounds.min + bounds.size().component_mul(&vec3(rng.random(), rng.random(), rng.random()));
            let got = field.interpolate(&p).expect("box interior is meshed");
            let want = affine(&p);
            for k in 0..3 {
                assert!((got[k] - want[k]).abs() <= 1e-9, "{p:?}: {} vs {}", got[k], want[k]);
            }
            let len = (want[0].powi(2) + want[1].powi(2) + want[2].powi(2)).sqrt();
            assert!((got[3] - len).abs() <= 1e-9);
        }
    }
}

#[test]
fn locate_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut queries = 0;
    for seed in 0..10 {
        let mesh = TetMesh::from_inp(&random_mesh(100 + seed)).unwrap();
        let tree = AabbTree::build(&mesh);
        let b = mesh.bounds().expanded(1.0);
        for _ in 0..1000 {
            let p = b.min + b.size().component_mul(&vec3(rng.random(), rng.random(), rng.random()));
            assert_eq!(tree.locate(&mesh, &p), locate_brute_force(&mesh, &p), "{p:?}");
            queries += 1;
        }
    }
    assert_eq!(queries, 10_000);
}

#[test]
fn boundary_is_closed_and_signs_match() {
    let inp = common::kuhn_grid([6, 5, 4], 0.25, 5, |u| u * 6.0);
    let mesh = TetMesh::from_inp(&inp).unwrap();
    let boundary = mesh.extract_boundary();
    assert!(boundary.is_closed_manifold());
    assert_eq!(boundary.euler_characteristic(), 2);
    assert!((boundary.volume() - 216.0).abs() < 1e-9);
    let csv = common::results_csv(&inp, |_| [0.0; 3]);
    let results = parse_results_csv(csv.as_bytes(), mesh.node_ids()).unwrap();
    let field = SimulationField::new(mesh, results, &["1"], vec![MaterialId(0)], true, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..2000 {
        let p = vec3(rng.random_range(-3.0..9.0), rng.random_range(-3.0..9.0), rng.random_range(-3.0..9.0));
        let exact = vcad_core::design::box_sdf(&(p - Vec3::repeat(3.0)), &Vec3::repeat(3.0));
        if exact.abs() > 0.15 {
            assert_eq!(field.sdf(&p) <= 0.0, exact <= 0.0, "{p:?}");
        }
        if exact.abs() < 0.3 {
            assert!((field.sdf(&p) - exact).abs() < 0.02, "{p:?}");
        }
    }
}

#[test]
fn field_from_files_grades_seat() {
    let dir = tempfile::tempdir().unwrap();
    let inp = common::kuhn_grid([13, 8, 3], 0.2, 11, common::seat_map);
    std::fs::write(dir.path().join("seat.inp"), write_inp(&inp)).unwrap();
    std::fs::write(dir.path().join("seat.csv"), common::results_csv(&inp, common::seat_displacement)).unwrap();
    let doc = r#"{"vcad_version": 1, "root": {"kind": "SimulationField", "params": {
        "inp": "seat.inp", "csv": "seat.csv",
        "expressions": ["(len-0.000055)/0.00035", "-(len-0.000055)/0.00035+1"],
        "materials": ["blue", "green"], "grid_cell": 0.5}}}"#;
    std::fs::write(dir.path().join("seat.json"), doc).unwrap();
    let d = Design::load(&dir.path().join("seat.json")).unwrap();
    let (blue, green) = (d.materials.id("blue").unwrap(), d.materials.id("green").unwrap());
    let mid = vec3(0.0, 0.0, 15.0);
    assert!(d.root.sdf(&mid) < 0.0);
    let f = d.root.fractions(&mid);
    assert!(f.get(blue) > 0.9, "{f:?}");
    let nose = vec3(60.0, 0.0, 12.0);
    assert!(d.root.sdf(&nose) < 0.0, "{}", d.root.sdf(&nose));
    assert!(d.root.fractions(&nose).get(green) > 0.5);
    // the JSON writer keeps the file references
    let again = Design::from_json(&d.to_json().unwrap(), Some(dir.path())).unwrap();
    assert_eq!(again, d);
}
