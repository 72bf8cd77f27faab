#![allow(dead_code)]

use vcad_core::design::{Design, DesignNode};
use vcad_core::geom::{vec3, Vec3};
use vcad_core::lattice::{GraphLattice, Topology};
use vcad_core::material::MaterialTable;

pub mod csg;

pub fn table() -> MaterialTable {
    MaterialTable::default_materials()
}

/// 15 × 10 × 5 bar graded red (+x) to blue (−x).
pub fn gradient_bar() -> Design {
    let t = table();
    let bar = DesignNode::rect_prism(Vec3::zeros(), vec3(15.0, 10.0, 5.0), t.id("gray").unwrap()).unwrap();
    let graded = DesignNode::fgrade(
        &["x/15+0.5", "-x/15+0.5"],
        vec![t.id("red").unwrap(), t.id("blue").unwrap()],
        true,
        bar,
    )
    .unwrap();
    Design::new(t, graded)
}

pub fn sphere(r: f64) -> Design {
    let t = table();
    let red = t.id("red").unwrap();
    Design::new(t, DesignNode::sphere(Vec3::zeros(), r, red).unwrap())
}

pub fn cube(side: f64) -> Design {
    let t = table();
    let red = t.id("red").unwrap();
    Design::new(t, DesignNode::rect_prism(Vec3::zeros(), Vec3::repeat(side), red).unwrap())
}

/// Cube filled with a constant 50/50 red/blue mixture.
pub fn half_half_cube(side: f64) -> Design {
    let t = table();
    let body = DesignNode::rect_prism(Vec3::zeros(), Vec3::repeat(side), t.id("gray").unwrap()).unwrap();
    let g = DesignNode::fgrade(&["0.5", "0.5"], vec![t.id("red").unwrap(), t.id("blue").unwrap()], true, body).unwrap();
    Design::new(t, g)
}

/// `cells`³ tiled BCC lattice of `cell` mm cells clipped to its cube.
pub fn bcc_block(cell: f64, cells: usize, diameter: f64) -> Design {
    let t = table();
    let lattice = GraphLattice::named(Topology::BodyCenteredCubic, Vec3::repeat(cell), diameter, t.id("rigid").unwrap()).unwrap();
    let tiled = DesignNode::tile(DesignNode::GraphLattice(lattice), None).unwrap();
    let side = cell * cells as f64;
    let clip = DesignNode::rect_prism(Vec3::zeros(), Vec3::repeat(side), t.id("rigid").unwrap()).unwrap();
    Design::new(t, DesignNode::intersection(false, vec![tiled, clip]).unwrap())
}

/// Tet mesh of a structured `n` grid over the unit cube, each cell cut into
/// six tets along its main diagonal. Interior nodes are moved by up to
/// `jitter` cell widths before `map` places every node. Node ids start at
/// 101 so they differ from positions.
pub fn kuhn_grid(n: [usize; 3], jitter: f64, seed: u64, map: impl Fn(Vec3) -> Vec3) -> vcad_core::inp::InpMesh {
    use rand::{Rng, SeedableRng};
    use vcad_core::inp::{Element, ElementType, InpMesh, Node};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let idx = |i: usize, j: usize, k: usize| i + (n[0] + 1) * (j + (n[1] + 1) * k);
    let mut nodes = Vec::new();
    for k in 0..=n[2] {
        for j in 0..=n[1] {
            for i in 0..=n[0] {
                let mut u = vec3(i as f64 / n[0] as f64, j as f64 / n[1] as f64, k as f64 / n[2] as f64);
                let interior = [i, j, k].iter().zip(&n).all(|(&c, &m)| c > 0 && c < m);
                if interior && jitter > 0.0 {
                    for a in 0..3 {
                        u[a] += rng.random_range(-jitter..jitter) / n[a] as f64;
                    }
                }
                nodes.push(Node { id: 101 + nodes.len() as u64, position: map(u) });
            }
        }
    }
    let mut elements = Vec::new();
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                for p in perms {
                    let mut c = [i, j, k];
                    let mut tet = vec![idx(c[0], c[1], c[2])];
                    for a in [p[0], p[1]] {
                        c[a] += 1;
                        tet.push(idx(c[0], c[1], c[2]));
                    }
                    tet.push(idx(i + 1, j + 1, k + 1));
                    elements.push(Element {
                        id: elements.len() as u64 + 1,
                        kind: ElementType::C3D4,
                        nodes: tet.into_iter().map(|v| nodes[v].id).collect(),
                    });
                }
            }
        }
    }
    InpMesh { nodes, elements, ..InpMesh::default() }
}

/// Results CSV with columns `id,dx,dy,dz` from a per-node function.
pub fn results_csv(mesh: &vcad_core::inp::InpMesh, f: impl Fn(&Vec3) -> [f64; 3]) -> String {
    let mut out = String::from("id,dx,dy,dz\n");
    for n in &mesh.nodes {
        let [a, b, c] = f(&n.position);
        out.push_str(&format!("{},{a:?},{b:?},{c:?}\n", n.id));
    }
    out
}

/// Saddle-shaped seat, about 130 × 75 × 30 mm, tapering toward the nose.
pub fn seat_map(u: Vec3) -> Vec3 {
    let x = 130.0 * u.x - 65.0;
    let half_width = 37.5 * (1.0 - 0.6 * u.x);
    let y = (2.0 * u.y - 1.0) * half_width;
    let lift = 8.0 * (2.0 * u.y - 1.0).powi(2) + 6.0 * u.x * u.x;
    let z = lift + (12.0 + 10.0 * (1.0 - u.x)) * u.z;
    vec3(x, y, z)
}

/// Displacement-like field whose magnitude spans the Listing 5 range.
pub fn seat_displacement(p: &Vec3) -> [f64; 3] {
    let s = (-(p.x * p.x) / 1600.0 - (p.y * p.y) / 400.0).exp();
    [0.0, 0.0, -(0.000055 + 0.00035 * s)]
}
