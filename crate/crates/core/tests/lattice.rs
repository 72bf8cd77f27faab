mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vcad_core::design::DesignNode;
use vcad_core::geom::{vec3, Vec3};
use vcad_core::lattice::{grade_lattice, GraphLattice, LatticeGrading, Strut, Topology};
use vcad_core::material::MaterialId;

#[test]
fn bvh_distance_matches_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut pt = |r: f64| vec3(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r));
    let edges: Vec<(Vec3, Vec3)> = (0..500).map(|_| {
        let a = pt(20.0);
        (a, a + pt(3.0) + vec3(0.01, 0.0, 0.0))
    }).collect();
    let lattice = GraphLattice::from_edges(edges, 0.3, MaterialId(0)).unwrap();
    for _ in 0..10_000 {
        let p = pt(25.0);
        assert_eq!(lattice.sdf(&p), lattice.sdf_brute_force(&p), "{p:?}");
    }
}

#[test]
fn listing_lattice_in_sphere() {
    let t = common::table();
    let gray = t.id("gray").unwrap();
    let cell = GraphLattice::named(Topology::BodyCenteredCubic, Vec3::repeat(5.0), 0.35, gray).unwrap();
    let tile = DesignNode::tile(DesignNode::GraphLattice(cell), None).unwrap();
    let root = DesignNode::intersection(false, vec![tile, DesignNode::sphere(Vec3::zeros(), 10.0, gray).unwrap()]).unwrap();
    // cell centers of the tiling are BCC nodes
    assert!(root.sdf(&Vec3::zeros()) < 0.0);
    assert!(root.sdf(&vec3(5.0, 5.0, 0.0)) < 0.0);
    assert!(root.sdf(&vec3(15.0, 0.0, 0.0)) > 0.0);
    assert_eq!(root.fractions(&Vec3::zeros()).dominant(), Some(gray));
}

#[test]
fn per_strut_grading_follows_strut_parameter() {
    let t = common::table();
    let (m, y) = (t.id("magenta").unwrap(), t.id("yellow").unwrap());
    let cell = GraphLattice::from_edges(vec![(Vec3::zeros(), vec3(10.0, 0.0, 0.0))], 1.0, m).unwrap();
    let g = grade_lattice(
        cell,
        false,
        LatticeGrading::PerStrut { expressions: vec![vec!["1-t".into(), "t".into()]], materials: vec![m, y], probabilistic: true },
    )
    .unwrap();
    let f = g.fractions(&vec3(2.5, 0.0, 0.0));
    assert!((f.get(m) - 0.75).abs() < 1e-12 && (f.get(y) - 0.25).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn strut_is_symmetric(a in prop::array::uniform3(-5.0..5.0f64), b in prop::array::uniform3(-5.0..5.0f64),
                          d in 0.1..2.0f64, p in prop::array::uniform3(-8.0..8.0f64)) {
        let (a, b, p) = (Vec3::from(a), Vec3::from(b), Vec3::from(p));
        prop_assume!((a - b).norm() > 1e-6);
        let s1 = Strut::new(a, b, d, MaterialId(0)).unwrap();
        let s2 = Strut::new(b, a, d, MaterialId(0)).unwrap();
        prop_assert!((s1.sdf(&p) - s2.sdf(&p)).abs() <= 1e-12);
        // capsule distance written out directly
        let t = ((p - a).dot(&(b - a)) / (b - a).norm_squared()).clamp(0.0, 1.0);
        prop_assert!((s1.sdf(&p) - ((p - (a + (b - a) * t)).norm() - d / 2.0)).abs() <= 1e-12);
    }

    #[test]
    fn per_cell_grading_is_periodic(
        ix in -40i32..40, iy in -40i32..40, iz in -40i32..40, k in prop::array::uniform3(-4i32..4),
        topo in prop::sample::select(vec![Topology::SimpleCubic, Topology::BodyCenteredCubic, Topology::FaceCenteredCubic, Topology::Octet]),
    ) {
        let t = common::table();
        let cell = GraphLattice::named(topo, vec3(4.0, 4.0, 2.5), 0.5, t.id("gray").unwrap()).unwrap();
        let g = grade_lattice(cell, true, LatticeGrading::PerCell {
            expressions: vec!["sqrt(x*x+y*y+z*z)/3".into(), "1-sqrt(x*x+y*y+z*z)/3".into()],
            materials: vec![t.id("red").unwrap(), t.id("blue").unwrap()],
            probabilistic: true,
        }).unwrap();
        let p = vec3(ix as f64, iy as f64, iz as f64) / 8.0;
        let q = p + vec3(4.0 * k[0] as f64, 4.0 * k[1] as f64, 2.5 * k[2] as f64);
        prop_assert_eq!(g.sdf(&p), g.sdf(&q));
        prop_assert_eq!(g.fractions(&p), g.fractions(&q));
    }
}
