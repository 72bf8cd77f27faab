//! Random CSG trees with an independent distance oracle.

use nalgebra::{Matrix4, Rotation3, Translation3, Unit, Vector3};
use proptest::prelude::*;
use vcad_core::design::DesignNode;
use vcad_core::geom::{vec3, Vec3};
use vcad_core::material::MaterialId;

#[derive(Debug, Clone)]
pub enum Tree {
    Sphere(Vec3, f64),
    Box(Vec3, Vec3),
    Union(Vec<Tree>),
    Inter(Vec<Tree>),
    Diff(Box<Tree>, Box<Tree>),
}

pub fn v3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| vec3(x, y, z))
}

pub fn leaf() -> impl Strategy<Value = Tree> {
    prop_oneof![
        (v3(5.0), 0.5..5.0f64).prop_map(|(c, r)| Tree::Sphere(c, r)),
        (v3(5.0), v3(4.0)).prop_map(|(c, d)| Tree::Box(c, d.abs() + Vec3::repeat(0.5))),
    ]
}

pub fn tree() -> impl Strategy<Value = Tree> {
    leaf().prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..4).prop_map(Tree::Union),
            prop::collection::vec(inner.clone(), 1..4).prop_map(Tree::Inter),
            (inner.clone(), inner).prop_map(|(a, b)| Tree::Diff(Box::new(a), Box::new(b))),
        ]
    })
}

pub fn build(t: &Tree) -> DesignNode {
    let m = MaterialId(0);
    match t {
        Tree::Sphere(c, r) => DesignNode::sphere(*c, *r, m).unwrap(),
        Tree::Box(c, d) => DesignNode::rect_prism(*c, *d, m).unwrap(),
        Tree::Union(cs) => DesignNode::union(cs.iter().map(build).collect()),
        Tree::Inter(cs) => DesignNode::intersection(false, cs.iter().map(build).collect()).unwrap(),
        Tree::Diff(a, b) => DesignNode::difference(build(a), build(b)),
    }
}

/// Leaf distances written out from scratch.
pub fn oracle(t: &Tree, p: &Vec3) -> f64 {
    match t {
        Tree::Sphere(c, r) => ((p.x - c.x).powi(2) + (p.y - c.y).powi(2) + (p.z - c.z).powi(2)).sqrt() - r,
        Tree::Box(c, d) => {
            let q = [(p.x - c.x).abs() - d.x / 2.0, (p.y - c.y).abs() - d.y / 2.0, (p.z - c.z).abs() - d.z / 2.0];
            let outside = q.iter().map(|v| v.max(0.0).powi(2)).sum::<f64>().sqrt();
            outside + q[0].max(q[1]).max(q[2]).min(0.0)
        }
        Tree::Union(cs) => cs.iter().map(|c| oracle(c, p)).fold(f64::INFINITY, f64::min),
        Tree::Inter(cs) => cs.iter().map(|c| oracle(c, p)).fold(f64::NEG_INFINITY, f64::max),
        Tree::Diff(a, b) => oracle(a, p).max(-oracle(b, p)),
    }
}

pub fn rigid() -> impl Strategy<Value = Matrix4<f64>> {
    (v3(1.0), 0.0..std::f64::consts::TAU, v3(10.0)).prop_filter_map("zero axis", |(axis, angle, t)| {
        let axis = Unit::try_new(Vector3::new(axis.x, axis.y, axis.z), 1e-3)?;
        let rot = Rotation3::from_axis_angle(&axis, angle);
        Some(Translation3::new(t.x, t.y, t.z).to_homogeneous() * rot.to_homogeneous())
    })
}

pub fn apply(m: &Matrix4<f64>, p: &Vec3) -> Vec3 {
    (m * p.push(1.0)).xyz()
}
