//! JSON interchange for design trees.
//!
//! ```json
//! {
//!   "vcad_version": 1,
//!   "materials": [{"name": "red", "color": [255, 0, 0, 255]}, ...],
//!   "root": {"kind": "FGrade", "params": {...}, "children": [...]}
//! }
//! ```
//!
//! `materials` is optional and defaults to the built-in table. Material
//! references may be names or integer ids. All lengths are millimeters.
//! Relative file paths resolve against the directory of the design file.
//!
//! | kind | params | children |
//! |------|--------|----------|
//! | `Sphere` | `center`, `radius`, `material` | 0 |
//! | `RectPrism` | `center`, `dims`, `material` | 0 |
//! | `Strut` | `a`, `b`, `diameter`, `material` | 0 |
//! | `Union`, `Intersection` | `smooth` (default false) | ≥ 1 |
//! | `Difference` | | 2 |
//! | `Transform` | `matrix` (4 rows of 4, last row `0 0 0 1`) | 1 |
//! | `FGrade` | `expressions`, `materials`, `probabilistic` (default true) | 1 |
//! | `Tile` | `period` (optional) | 1 |
//! | `GraphLattice` | `topology` + `cell_size`, or `edges`; `diameter`, `material`, optional `strut_grading` | 0 |
//! | `SimulationField` | `inp`, `csv`, `expressions`, `materials`, `probabilistic`, `grid_cell` | 0 |
//! | `MeshImport` | `stl` or `mesh: {vertices, triangles}`; `material`, `cell` | 0 |
//!
//! `strut_grading` holds `expressions` (one list per strut, over
//! `x, y, z, t`), `materials` and `probabilistic`. A scalar `cell_size` or
//! `period` means the same value on every axis.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::Matrix4;
use serde_json::{json, Map, Value};

use super::{Design, DesignError, DesignNode, MeshImport, MeshSource};
use crate::geom::Vec3;
use crate::grading::Grading;
use crate::lattice::{GraphLattice, LatticeLayout, Strut, STRUT_VARS};
use crate::material::{Material, MaterialId, MaterialTable};
use crate::simfield::{SimulationField, DEFAULT_GRID_CELL};
use crate::surface::TriangleMesh;

pub const SCHEMA_VERSION: u64 = 1;

const KINDS: &[&str] = &[
    "Sphere",
    "RectPrism",
    "Strut",
    "Union",
    "Intersection",
    "Difference",
    "Transform",
    "FGrade",
    "Tile",
    "GraphLattice",
    "SimulationField",
    "MeshImport",
];

fn err(path: &str, message: impl Into<String>) -> DesignError {
    DesignError::Json { path: path.to_string(), message: message.into() }
}

struct Reader<'a> {
    materials: &'a MaterialTable,
    base_dir: Option<&'a Path>,
}

fn num(v: &Value, path: &str) -> Result<f64, DesignError> {
    v.as_f64().filter(|f| f.is_finite()).ok_or_else(|| err(path, "expected a number"))
}

fn vec3(v: &Value, path: &str) -> Result<Vec3, DesignError> {
    match v.as_array() {
        Some(a) if a.len() == 3 => {
            Ok(Vec3::new(num(&a[0], &format!("{path}[0]"))?, num(&a[1], &format!("{path}[1]"))?, num(&a[2], &format!("{path}[2]"))?))
        }
        _ => Err(err(path, "expected [x, y, z]")),
    }
}

/// `[x, y, z]` or a single number for all three.
fn vec3_or_scalar(v: &Value, path: &str) -> Result<Vec3, DesignError> {
    if v.is_number() {
        Ok(Vec3::repeat(num(v, path)?))
    } else {
        vec3(v, path)
    }
}

fn strings(v: &Value, path: &str) -> Result<Vec<String>, DesignError> {
    let a = v.as_array().ok_or_else(|| err(path, "expected an array of strings"))?;
    a.iter()
        .enumerate()
        .map(|(i, s)| s.as_str().map(str::to_string).ok_or_else(|| err(&format!("{path}[{i}]"), "expected a string")))
        .collect()
}

fn v3(p: &Vec3) -> Value {
    json!([p.x, p.y, p.z])
}

impl Reader<'_> {
    fn material(&self, v: &Value, path: &str) -> Result<MaterialId, DesignError> {
        if let Some(name) = v.as_str() {
            return self.materials.id(name).map_err(|e| err(path, e.to_string()));
        }
        if let Some(id) = v.as_u64() {
            let id = MaterialId(u16::try_from(id).map_err(|_| err(path, "material id out of range"))?);
            self.materials.get(id).map_err(|e| err(path, e.to_string()))?;
            return Ok(id);
        }
        Err(err(path, "expected a material name or id"))
    }

    fn materials(&self, v: &Value, path: &str) -> Result<Vec<MaterialId>, DesignError> {
        let a = v.as_array().ok_or_else(|| err(path, "expected an array of materials"))?;
        a.iter().enumerate().map(|(i, m)| self.material(m, &format!("{path}[{i}]"))).collect()
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let p = PathBuf::from(p);
        match self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p,
        }
    }

    fn node(&self, v: &Value, path: &str) -> Result<DesignNode, DesignError> {
        let obj = v.as_object().ok_or_else(|| err(path, "expected a node object"))?;
        let kind = obj
            .get("kind")
            .ok_or_else(|| err(path, "missing \"kind\""))?
            .as_str()
            .ok_or_else(|| err(&format!("{path}.kind"), "expected a string"))?;
        if !KINDS.contains(&kind) {
            return Err(err(&format!("{path}.kind"), format!("unknown node kind '{kind}'")));
        }
        let empty = Map::new();
        let params = match obj.get("params") {
            None => &empty,
            Some(p) => p.as_object().ok_or_else(|| err(&format!("{path}.params"), "expected an object"))?,
        };
        let ppath = format!("{path}.params");
        let get = |key: &str| params.get(key).ok_or_else(|| err(&ppath, format!("missing \"{key}\"")));
        let at = |key: &str| format!("{ppath}.{key}");
        let material = || match params.get("material") {
            Some(m) => self.material(m, &at("material")),
            None => Ok(MaterialId(0)),
        };
        let flag = |key: &str, default: bool| match params.get(key) {
            None => Ok(default),
            Some(b) => b.as_bool().ok_or_else(|| err(&at(key), "expected true or false")),
        };

        let children: Vec<DesignNode> = match obj.get("children") {
            None => Vec::new(),
            Some(c) => {
                let a = c.as_array().ok_or_else(|| err(&format!("{path}.children"), "expected an array"))?;
                a.iter()
                    .enumerate()
                    .map(|(i, c)| self.node(c, &format!("{path}.children[{i}]")))
                    .collect::<Result<_, _>>()?
            }
        };
        let count = children.len();
        let arity = |n: usize| -> Result<(), DesignError> {
            if count != n {
                Err(err(path, format!("{kind} takes {n} children, found {count}")))
            } else {
                Ok(())
            }
        };
        let mut children = children.into_iter();

        let node = match kind {
            "Sphere" => {
                arity(0)?;
                DesignNode::sphere(vec3(get("center")?, &at("center"))?, num(get("radius")?, &at("radius"))?, material()?)
            }
            "RectPrism" => {
                arity(0)?;
                DesignNode::rect_prism(vec3(get("center")?, &at("center"))?, vec3(get("dims")?, &at("dims"))?, material()?)
            }
            "Strut" => {
                arity(0)?;
                Strut::new(
                    vec3(get("a")?, &at("a"))?,
                    vec3(get("b")?, &at("b"))?,
                    num(get("diameter")?, &at("diameter"))?,
                    material()?,
                )
                .map(DesignNode::Strut)
            }
            "Union" | "Intersection" => {
                if count == 0 {
                    return Err(err(path, format!("{kind} needs at least one child")));
                }
                let smooth = flag("smooth", false)?;
                let c: Vec<DesignNode> = children.by_ref().collect();
                if kind == "Union" {
                    Ok(if smooth { DesignNode::smooth_union(c) } else { DesignNode::union(c) })
                } else {
                    DesignNode::intersection(smooth, c)
                }
            }
            "Difference" => {
                arity(2)?;
                let a = children.next().unwrap();
                let b = children.next().unwrap();
                Ok(DesignNode::difference(a, b))
            }
            "Transform" => {
                arity(1)?;
                let m = matrix(get("matrix")?, &at("matrix"))?;
                DesignNode::transform(m, children.next().unwrap())
            }
            "FGrade" => {
                arity(1)?;
                let exprs = strings(get("expressions")?, &at("expressions"))?;
                let mats = self.materials(get("materials")?, &at("materials"))?;
                DesignNode::fgrade(&exprs, mats, flag("probabilistic", true)?, children.next().unwrap())
            }
            "Tile" => {
                arity(1)?;
                let period = params.get("period").map(|p| vec3_or_scalar(p, &at("period"))).transpose()?;
                DesignNode::tile(children.next().unwrap(), period)
            }
            "GraphLattice" => {
                arity(0)?;
                self.lattice(params, &ppath, material()?)
            }
            "SimulationField" => {
                arity(0)?;
                let inp = self.resolve(get("inp")?.as_str().ok_or_else(|| err(&at("inp"), "expected a path"))?);
                let csv = self.resolve(get("csv")?.as_str().ok_or_else(|| err(&at("csv"), "expected a path"))?);
                let exprs = strings(get("expressions")?, &at("expressions"))?;
                let mats = self.materials(get("materials")?, &at("materials"))?;
                let cell = params.get("grid_cell").map(|c| num(c, &at("grid_cell"))).transpose()?.unwrap_or(DEFAULT_GRID_CELL);
                SimulationField::from_files(&inp, &csv, &exprs, mats, flag("probabilistic", true)?, cell)
                    .map(|f| DesignNode::SimulationField(Arc::new(f)))
            }
            "MeshImport" => {
                arity(0)?;
                let cell = params.get("cell").map(|c| num(c, &at("cell"))).transpose()?.unwrap_or(MeshImport::DEFAULT_CELL);
                let (mesh, source) = match (params.get("stl"), params.get("mesh")) {
                    (Some(p), None) => {
                        let p = self.resolve(p.as_str().ok_or_else(|| err(&at("stl"), "expected a path"))?);
                        let mesh = TriangleMesh::read_stl(&p).map_err(|e| err(&at("stl"), format!("{}: {e}", p.display())))?;
                        (mesh, MeshSource::Stl(p))
                    }
                    (None, Some(m)) => (inline_mesh(m, &at("mesh"))?, MeshSource::Inline),
                    _ => return Err(err(&ppath, "MeshImport needs exactly one of \"stl\" or \"mesh\"")),
                };
                MeshImport::new(mesh, material()?, cell, source).map(DesignNode::MeshImport)
            }
            _ => unreachable!(),
        };
        node.map_err(|e| e.at(path))
    }

    fn lattice(&self, params: &Map<String, Value>, ppath: &str, material: MaterialId) -> Result<DesignNode, DesignError> {
        let at = |key: &str| format!("{ppath}.{key}");
        let diameter = num(params.get("diameter").ok_or_else(|| err(ppath, "missing \"diameter\""))?, &at("diameter"))?;
        let layout = match (params.get("topology"), params.get("edges")) {
            (Some(t), None) => {
                let topology = t.as_str().ok_or_else(|| err(&at("topology"), "expected a string"))?.parse().map_err(|e: DesignError| e.at(&at("topology")))?;
                let cell = vec3_or_scalar(params.get("cell_size").ok_or_else(|| err(ppath, "missing \"cell_size\""))?, &at("cell_size"))?;
                LatticeLayout::Named { topology, cell_size: cell }
            }
            (None, Some(e)) => {
                let a = e.as_array().ok_or_else(|| err(&at("edges"), "expected an array of [a, b] pairs"))?;
                let edges = a
                    .iter()
                    .enumerate()
                    .map(|(i, pair)| {
                        let p = format!("{}[{i}]", at("edges"));
                        match pair.as_array() {
                            Some(ab) if ab.len() == 2 => Ok((vec3(&ab[0], &format!("{p}[0]"))?, vec3(&ab[1], &format!("{p}[1]"))?)),
                            _ => Err(err(&p, "expected [a, b]")),
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                LatticeLayout::Edges(edges)
            }
            _ => return Err(err(ppath, "GraphLattice needs exactly one of \"topology\" or \"edges\"")),
        };
        let mut lattice = GraphLattice::new(layout, diameter, material)?;
        if let Some(g) = params.get("strut_grading") {
            let gp = at("strut_grading");
            let g = g.as_object().ok_or_else(|| err(&gp, "expected an object"))?;
            let lists = g
                .get("expressions")
                .and_then(Value::as_array)
                .ok_or_else(|| err(&gp, "missing \"expressions\" (one list per strut)"))?;
            let mats = self.materials(g.get("materials").ok_or_else(|| err(&gp, "missing \"materials\""))?, &format!("{gp}.materials"))?;
            let probabilistic = match g.get("probabilistic") {
                None => true,
                Some(b) => b.as_bool().ok_or_else(|| err(&format!("{gp}.probabilistic"), "expected true or false"))?,
            };
            let grades = lists
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    let p = format!("{gp}.expressions[{i}]");
                    Grading::parse(&strings(l, &p)?, mats.clone(), probabilistic, STRUT_VARS).map_err(|e| e.at(&p))
                })
                .collect::<Result<Vec<_>, _>>()?;
            lattice = lattice.with_strut_grades(grades)?;
        }
        Ok(DesignNode::GraphLattice(lattice))
    }
}

fn matrix(v: &Value, path: &str) -> Result<Matrix4<f64>, DesignError> {
    let rows = v.as_array().ok_or_else(|| err(path, "expected 4 rows of 4 numbers"))?;
    let flat: Vec<f64> = if rows.len() == 16 {
        rows.iter().enumerate().map(|(i, x)| num(x, &format!("{path}[{i}]"))).collect::<Result<_, _>>()?
    } else if rows.len() == 4 {
        let mut out = Vec::with_capacity(16);
        for (i, r) in rows.iter().enumerate() {
            match r.as_array() {
                Some(r) if r.len() == 4 => {
                    for (j, x) in r.iter().enumerate() {
                        out.push(num(x, &format!("{path}[{i}][{j}]"))?);
                    }
                }
                _ => return Err(err(&format!("{path}[{i}]"), "expected 4 numbers")),
            }
        }
        out
    } else {
        return Err(err(path, "expected 4 rows of 4 numbers"));
    };
    Ok(Matrix4::from_row_slice(&flat))
}

fn inline_mesh(v: &Value, path: &str) -> Result<TriangleMesh, DesignError> {
    let obj = v.as_object().ok_or_else(|| err(path, "expected {vertices, triangles}"))?;
    let verts = obj.get("vertices").and_then(Value::as_array).ok_or_else(|| err(path, "missing \"vertices\""))?;
    let tris = obj.get("triangles").and_then(Value::as_array).ok_or_else(|| err(path, "missing \"triangles\""))?;
    let vertices = verts
        .iter()
        .enumerate()
        .map(|(i, p)| vec3(p, &format!("{path}.vertices[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let triangles = tris
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let p = format!("{path}.triangles[{i}]");
            let a = t.as_array().filter(|a| a.len() == 3).ok_or_else(|| err(&p, "expected 3 vertex indices"))?;
            let mut out = [0u32; 3];
            for (k, x) in a.iter().enumerate() {
                let idx = x.as_u64().filter(|&i| (i as usize) < vertices.len()).ok_or_else(|| err(&p, "vertex index out of range"))?;
                out[k] = idx as u32;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, DesignError>>()?;
    Ok(TriangleMesh::new(vertices, triangles))
}

fn material_table(v: &Value) -> Result<MaterialTable, DesignError> {
    let a = v.as_array().ok_or_else(|| err("$.materials", "expected an array"))?;
    let mut out = Vec::with_capacity(a.len());
    for (i, m) in a.iter().enumerate() {
        let p = format!("$.materials[{i}]");
        let name = m.get("name").and_then(Value::as_str).ok_or_else(|| err(&p, "missing \"name\""))?;
        let color = match m.get("color").and_then(Value::as_array) {
            Some(c) if c.len() == 4 || c.len() == 3 => {
                let mut rgba = [0u8, 0, 0, 255];
                for (k, x) in c.iter().enumerate() {
                    rgba[k] = x.as_u64().filter(|&v| v <= 255).ok_or_else(|| err(&format!("{p}.color[{k}]"), "expected 0..255"))? as u8;
                }
                rgba
            }
            _ => return Err(err(&p, "\"color\" must be [r, g, b] or [r, g, b, a]")),
        };
        out.push(Material { id: MaterialId(i as u16), name: name.to_string(), color });
    }
    MaterialTable::from_materials(out).map_err(|e| err("$.materials", e.to_string()))
}

struct Writer<'a> {
    materials: &'a MaterialTable,
}

impl Writer<'_> {
    fn material(&self, m: MaterialId) -> Value {
        match self.materials.name(m) {
            Some(n) => Value::from(n),
            None => Value::from(m.0),
        }
    }

    fn materials(&self, ms: &[MaterialId]) -> Value {
        Value::Array(ms.iter().map(|&m| self.material(m)).collect())
    }

    fn node(&self, n: &DesignNode) -> Result<Value, DesignError> {
        let (kind, params, children): (&str, Value, Vec<&DesignNode>) = match n {
            DesignNode::Sphere(s) => ("Sphere", json!({"center": v3(&s.center), "radius": s.radius, "material": self.material(s.material)}), vec![]),
            DesignNode::RectPrism(r) => ("RectPrism", json!({"center": v3(&r.center), "dims": v3(&r.dims), "material": self.material(r.material)}), vec![]),
            DesignNode::Strut(s) => (
                "Strut",
                json!({"a": v3(&s.a), "b": v3(&s.b), "diameter": s.diameter, "material": self.material(s.material)}),
                vec![],
            ),
            DesignNode::Union(c) => ("Union", json!({"smooth": c.smooth}), c.children.iter().collect()),
            DesignNode::Intersection(c) => ("Intersection", json!({"smooth": c.smooth}), c.children.iter().collect()),
            DesignNode::Difference(d) => ("Difference", json!({}), vec![&*d.a, &*d.b]),
            DesignNode::Transform(t) => {
                let m = t.matrix();
                let rows: Vec<Value> = (0..4).map(|i| json!([m[(i, 0)], m[(i, 1)], m[(i, 2)], m[(i, 3)]])).collect();
                ("Transform", json!({ "matrix": rows }), vec![t.child()])
            }
            DesignNode::FGrade(g) => (
                "FGrade",
                json!({
                    "expressions": g.grading.expressions().iter().map(|e| e.source()).collect::<Vec<_>>(),
                    "materials": self.materials(g.grading.materials()),
                    "probabilistic": g.grading.probabilistic(),
                }),
                vec![&*g.child],
            ),
            DesignNode::Tile(t) => {
                let params = if t.explicit_period() { json!({"period": v3(&t.period())}) } else { json!({}) };
                ("Tile", params, vec![t.child()])
            }
            DesignNode::GraphLattice(l) => {
                let mut p = Map::new();
                match l.layout() {
                    LatticeLayout::Named { topology, cell_size } => {
                        p.insert("topology".into(), Value::from(topology.name()));
                        p.insert("cell_size".into(), v3(cell_size));
                    }
                    LatticeLayout::Edges(e) => {
                        p.insert("edges".into(), Value::Array(e.iter().map(|(a, b)| json!([v3(a), v3(b)])).collect()));
                    }
                }
                p.insert("diameter".into(), Value::from(l.diameter()));
                p.insert("material".into(), self.material(l.material()));
                if let Some(g) = l.strut_grades() {
                    p.insert(
                        "strut_grading".into(),
                        json!({
                            "expressions": g.iter().map(|g| g.expressions().iter().map(|e| e.source()).collect::<Vec<_>>()).collect::<Vec<_>>(),
                            "materials": self.materials(g[0].materials()),
                            "probabilistic": g[0].probabilistic(),
                        }),
                    );
                }
                ("GraphLattice", Value::Object(p), vec![])
            }
            DesignNode::SimulationField(f) => {
                let (inp, csv) = f.sources().ok_or_else(|| {
                    DesignError::InvalidParameter("a SimulationField built in memory has no source files to reference".into())
                })?;
                let g = f.grading();
                (
                    "SimulationField",
                    json!({
                        "inp": inp.to_string_lossy(),
                        "csv": csv.to_string_lossy(),
                        "expressions": g.expressions().iter().map(|e| e.source()).collect::<Vec<_>>(),
                        "materials": self.materials(g.materials()),
                        "probabilistic": g.probabilistic(),
                        "grid_cell": f.grid_cell(),
                    }),
                    vec![],
                )
            }
            DesignNode::MeshImport(m) => {
                let mut p = Map::new();
                match m.source() {
                    MeshSource::Stl(path) => {
                        p.insert("stl".into(), Value::from(path.to_string_lossy()));
                    }
                    MeshSource::Inline => {
                        let mesh = m.mesh();
                        p.insert(
                            "mesh".into(),
                            json!({
                                "vertices": mesh.vertices.iter().map(v3).collect::<Vec<_>>(),
                                "triangles": mesh.triangles,
                            }),
                        );
                    }
                }
                p.insert("material".into(), self.material(m.material()));
                p.insert("cell".into(), Value::from(m.cell()));
                ("MeshImport", Value::Object(p), vec![])
            }
        };
        let mut obj = Map::new();
        obj.insert("kind".into(), Value::from(kind));
        obj.insert("params".into(), params);
        if !children.is_empty() {
            obj.insert("children".into(), Value::Array(children.into_iter().map(|c| self.node(c)).collect::<Result<_, _>>()?));
        }
        Ok(Value::Object(obj))
    }
}

impl Design {
    /// Parses a design document. Relative paths inside it resolve against
    /// `base_dir` when given, else the working directory.
    pub fn from_json(text: &str, base_dir: Option<&Path>) -> Result<Design, DesignError> {
        if text.trim().is_empty() {
            return Err(err("$", "missing root"));
        }
        let doc: Value = serde_json::from_str(text).map_err(|e| err("$", format!("invalid JSON: {e}")))?;
        let obj = doc.as_object().ok_or_else(|| err("$", "expected a JSON object"))?;
        let root = obj.get("root").ok_or_else(|| err("$", "missing root"))?;
        match obj.get("vcad_version") {
            None => return Err(err("$", "missing \"vcad_version\"")),
            Some(v) if v.as_u64() == Some(SCHEMA_VERSION) => {}
            Some(v) => return Err(err("$.vcad_version", format!("unsupported schema version {v} (expected {SCHEMA_VERSION})"))),
        }
        let materials = match obj.get("materials") {
            Some(m) => material_table(m)?,
            None => MaterialTable::default_materials(),
        };
        let reader = Reader { materials: &materials, base_dir };
        let root = reader.node(root, "$.root")?;
        Ok(Design { materials, root })
    }

    /// Reads a design file; relative paths inside resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Design, DesignError> {
        let text = std::fs::read_to_string(path).map_err(|source| DesignError::Io { path: path.to_path_buf(), source })?;
        Design::from_json(&text, path.parent())
    }

    pub fn to_json_value(&self) -> Result<Value, DesignError> {
        let writer = Writer { materials: &self.materials };
        let materials: Vec<Value> = self.materials.iter().map(|m| json!({"name": m.name, "color": m.color})).collect();
        Ok(json!({
            "vcad_version": SCHEMA_VERSION,
            "materials": materials,
            "root": writer.node(&self.root)?,
        }))
    }

    /// Pretty-printed document.
    pub fn to_json(&self) -> Result<String, DesignError> {
        Ok(serde_json::to_string_pretty(&self.to_json_value()?).expect("JSON values always serialize"))
    }
}
