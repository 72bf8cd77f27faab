//! Abaqus INP subset: nodes, C3D4/C3D8R elements, element sets, linear
//! elastic material cards and solid sections.
//!
//! Grammar accepted by [`parse_inp`]:
//!
//! ```text
//! ** comment
//! *NODE
//! id, x, y, z
//! *ELEMENT, TYPE=C3D4|C3D8R [, ELSET=name]
//! id, n1, n2, ...            (a trailing comma continues onto the next line)
//! *ELSET, ELSET=name [, GENERATE]
//! id, id, ...                (GENERATE: first, last [, step])
//! *MATERIAL, NAME=name
//! *ELASTIC
//! E, nu
//! *SOLID SECTION, ELSET=name, MATERIAL=name
//! ```
//!
//! Keywords and parameter names are case-insensitive. Other keywords are
//! skipped together with their data lines and reported in
//! [`InpMesh::ignored_keywords`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use smallvec::SmallVec;
use thiserror::Error;

use crate::geom::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum InpError {
    #[error("INP file has no {0} section")]
    MissingSection(&'static str),
    #[error("unsupported element type {0} (supported: C3D4, C3D8R)")]
    UnsupportedElementType(String),
    #[error("element {element} references unknown node {node}")]
    UnknownNode { element: u64, node: u64 },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u64 },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementType {
    C3D4,
    C3D8R,
}

impl ElementType {
    pub fn node_count(self) -> usize {
        match self {
            ElementType::C3D4 => 4,
            ElementType::C3D8R => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementType::C3D4 => "C3D4",
            ElementType::C3D8R => "C3D8R",
        }
    }

    fn parse(s: &str) -> Result<Self, InpError> {
        match s.to_ascii_uppercase().as_str() {
            "C3D4" => Ok(ElementType::C3D4),
            "C3D8R" => Ok(ElementType::C3D8R),
            _ => Err(InpError::UnsupportedElementType(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: u64,
    pub position: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: u64,
    pub kind: ElementType,
    pub nodes: SmallVec<[u64; 8]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialCard {
    pub name: String,
    /// Young's modulus, MPa.
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
}

impl MaterialCard {
    pub fn new(name: &str, youngs_modulus: f64, poisson_ratio: f64) -> Self {
        MaterialCard { name: name.to_string(), youngs_modulus, poisson_ratio }
    }

    /// Stiff photopolymer defaults.
    pub fn rigid() -> Self {
        MaterialCard::new("rigid", 2850.0, 0.39)
    }

    /// Elastomer defaults.
    pub fn soft() -> Self {
        MaterialCard::new("soft", 0.383, 0.50)
    }

    /// Built-in card for a material name, if any.
    pub fn default_for(name: &str) -> Option<Self> {
        match name {
            "rigid" => Some(MaterialCard::rigid()),
            "soft" => Some(MaterialCard::soft()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub elset: String,
    pub material: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InpMesh {
    pub nodes: Vec<Node>,
    pub elements: Vec<Element>,
    /// Named element sets in file order. `*ELEMENT, ELSET=` membership is
    /// folded in here as well.
    pub elsets: Vec<(String, Vec<u64>)>,
    pub materials: Vec<MaterialCard>,
    pub sections: Vec<Section>,
    pub ignored_keywords: Vec<String>,
}

impl InpMesh {
    pub fn elset(&self, name: &str) -> Option<&[u64]> {
        self.elsets.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    fn elset_mut(&mut self, name: &str) -> &mut Vec<u64> {
        match self.elsets.iter().position(|(n, _)| n == name) {
            Some(i) => &mut self.elsets[i].1,
            None => {
                self.elsets.push((name.to_string(), Vec::new()));
                &mut self.elsets.last_mut().unwrap().1
            }
        }
    }
}

enum Block {
    None,
    Node,
    Element { kind: ElementType, elset: Option<String> },
    Elset { name: String, generate: bool },
    Material,
    Elastic,
    Skip,
}

fn keyword_params(line: &str) -> (String, HashMap<String, String>) {
    let mut parts = line[1..].split(',');
    let keyword = parts.next().unwrap_or("").trim().to_ascii_uppercase();
    let mut params = HashMap::new();
    for p in parts {
        let mut kv = p.splitn(2, '=');
        let k = kv.next().unwrap_or("").trim().to_ascii_uppercase();
        if k.is_empty() {
            continue;
        }
        let v = kv.next().map(|v| v.trim().to_string()).unwrap_or_default();
        params.insert(k, v);
    }
    (keyword, params)
}

fn numbers<T: std::str::FromStr>(line: &str, lineno: usize) -> Result<Vec<T>, InpError> {
    line.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| InpError::Syntax { line: lineno, message: format!("bad number '{s}'") }))
        .collect()
}

/// Parses the INP subset described in the module docs.
pub fn parse_inp(text: &str) -> Result<InpMesh, InpError> {
    let mut mesh = InpMesh::default();
    let mut block = Block::None;
    let mut saw_node = false;
    let mut saw_element = false;
    let mut pending: Vec<u64> = Vec::new();
    let mut pending_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with("**") {
            continue;
        }
        if line.starts_with('*') {
            if !pending.is_empty() {
                return Err(InpError::Syntax { line: pending_line, message: "incomplete element record".into() });
            }
            let (keyword, params) = keyword_params(line);
            block = match keyword.as_str() {
                "NODE" => {
                    saw_node = true;
                    Block::Node
                }
                "ELEMENT" => {
                    let kind = params
                        .get("TYPE")
                        .ok_or(InpError::Syntax { line: lineno, message: "*ELEMENT without TYPE".into() })?;
                    saw_element = true;
                    Block::Element { kind: ElementType::parse(kind)?, elset: params.get("ELSET").cloned() }
                }
                "ELSET" => {
                    let name = params
                        .get("ELSET")
                        .ok_or(InpError::Syntax { line: lineno, message: "*ELSET without ELSET=".into() })?;
                    mesh.elset_mut(name);
                    Block::Elset { name: name.clone(), generate: params.contains_key("GENERATE") }
                }
                "MATERIAL" => {
                    let name = params
                        .get("NAME")
                        .ok_or(InpError::Syntax { line: lineno, message: "*MATERIAL without NAME".into() })?;
                    mesh.materials.push(MaterialCard::new(name, f64::NAN, f64::NAN));
                    Block::Material
                }
                "ELASTIC" => {
                    if mesh.materials.is_empty() {
                        return Err(InpError::Syntax { line: lineno, message: "*ELASTIC outside *MATERIAL".into() });
                    }
                    Block::Elastic
                }
                "SOLID SECTION" => {
                    let get = |k: &str| {
                        params.get(k).cloned().ok_or(InpError::Syntax {
                            line: lineno,
                            message: format!("*SOLID SECTION without {k}="),
                        })
                    };
                    mesh.sections.push(Section { elset: get("ELSET")?, material: get("MATERIAL")? });
                    Block::None
                }
                "HEADING" => Block::Skip,
                _ => {
                    log::warn!("INP line {lineno}: ignoring keyword *{keyword}");
                    mesh.ignored_keywords.push(keyword);
                    Block::Skip
                }
            };
            continue;
        }
        match &block {
            Block::None | Block::Material => {
                return Err(InpError::Syntax { line: lineno, message: "data line outside a data section".into() });
            }
            Block::Skip => {}
            Block::Node => {
                let mut parts = line.split(',').map(str::trim);
                let id = parts
                    .next()
                    .and_then(|s| s.parse::<u64>().ok())
                    .ok_or(InpError::Syntax { line: lineno, message: "bad node id".into() })?;
                let coords: Vec<f64> = numbers(&parts.collect::<Vec<_>>().join(","), lineno)?;
                if coords.len() != 3 {
                    return Err(InpError::Syntax { line: lineno, message: format!("node {id} needs 3 coordinates") });
                }
                mesh.nodes.push(Node { id, position: Vec3::new(coords[0], coords[1], coords[2]) });
            }
            Block::Element { kind, elset } => {
                if pending.is_empty() {
                    pending_line = lineno;
                }
                pending.extend(numbers::<u64>(line, lineno)?);
                let need = kind.node_count() + 1;
                if pending.len() > need {
                    return Err(InpError::Syntax {
                        line: lineno,
                        message: format!("{} element has {} nodes", kind.name(), pending.len() - 1),
                    });
                }
                if pending.len() == need {
                    let id = pending[0];
                    mesh.elements.push(Element { id, kind: *kind, nodes: pending[1..].iter().copied().collect() });
                    if let Some(name) = elset {
                        mesh.elset_mut(name).push(id);
                    }
                    pending.clear();
                } else if !line.ends_with(',') {
                    return Err(InpError::Syntax {
                        line: lineno,
                        message: format!("{} element needs {} nodes", kind.name(), kind.node_count()),
                    });
                }
            }
            Block::Elset { name, generate } => {
                let ids: Vec<u64> = numbers(line, lineno)?;
                if *generate {
                    let (first, last, step) = match ids[..] {
                        [a, b] => (a, b, 1),
                        [a, b, s] if s > 0 => (a, b, s),
                        _ => return Err(InpError::Syntax { line: lineno, message: "GENERATE needs first, last[, step]".into() }),
                    };
                    let set = mesh.elset_mut(name);
                    set.extend((first..=last).step_by(step as usize));
                } else {
                    mesh.elset_mut(name).extend(ids);
                }
            }
            Block::Elastic => {
                let v: Vec<f64> = numbers(line, lineno)?;
                if v.len() < 2 {
                    return Err(InpError::Syntax { line: lineno, message: "*ELASTIC needs E, nu".into() });
                }
                let m = mesh.materials.last_mut().unwrap();
                m.youngs_modulus = v[0];
                m.poisson_ratio = v[1];
                block = Block::Skip;
            }
        }
    }
    if !pending.is_empty() {
        return Err(InpError::Syntax { line: pending_line, message: "incomplete element record".into() });
    }
    if !saw_node {
        return Err(InpError::MissingSection("*NODE"));
    }
    if !saw_element {
        return Err(InpError::MissingSection("*ELEMENT"));
    }

    let mut node_ids = HashSet::with_capacity(mesh.nodes.len());
    for n in &mesh.nodes {
        if !node_ids.insert(n.id) {
            return Err(InpError::DuplicateId { kind: "node", id: n.id });
        }
    }
    let mut element_ids = HashSet::with_capacity(mesh.elements.len());
    for e in &mesh.elements {
        if !element_ids.insert(e.id) {
            return Err(InpError::DuplicateId { kind: "element", id: e.id });
        }
        if let Some(&node) = e.nodes.iter().find(|n| !node_ids.contains(n)) {
            return Err(InpError::UnknownNode { element: e.id, node });
        }
    }
    Ok(mesh)
}

/// Writes `mesh` in the grammar accepted by [`parse_inp`].
///
/// Elements are grouped by type; sets, materials and sections follow in
/// their stored order. Reals use the shortest round-trip representation.
pub fn write_inp(mesh: &InpMesh) -> String {
    let mut out = String::new();
    out.push_str("*HEADING\n");
    out.push_str("*NODE\n");
    for n in &mesh.nodes {
        let _ = writeln!(out, "{}, {:?}, {:?}, {:?}", n.id, n.position.x, n.position.y, n.position.z);
    }
    let mut by_kind: BTreeMap<&'static str, Vec<&Element>> = BTreeMap::new();
    for e in &mesh.elements {
        by_kind.entry(e.kind.name()).or_default().push(e);
    }
    for (kind, elements) in by_kind {
        let _ = writeln!(out, "*ELEMENT, TYPE={kind}");
        for e in elements {
            let _ = write!(out, "{}", e.id);
            for n in &e.nodes {
                let _ = write!(out, ", {n}");
            }
            out.push('\n');
        }
    }
    for (name, ids) in &mesh.elsets {
        let _ = writeln!(out, "*ELSET, ELSET={name}");
        for chunk in ids.chunks(16) {
            let line: Vec<String> = chunk.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{}", line.join(", "));
        }
    }
    for m in &mesh.materials {
        let _ = writeln!(out, "*MATERIAL, NAME={}", m.name);
        out.push_str("*ELASTIC\n");
        let _ = writeln!(out, "{:?}, {:?}", m.youngs_modulus, m.poisson_ratio);
    }
    for s in &mesh.sections {
        let _ = writeln!(out, "*SOLID SECTION, ELSET={}, MATERIAL={}", s.elset, s.material);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_TET: &str = "*NODE\n1, 0, 0, 0\n2, 1, 0, 0\n3, 0, 1, 0\n4, 0, 0, 1\n*ELEMENT, TYPE=C3D4\n1, 1, 2, 3, 4\n";

    #[test]
    fn minimal_tet() {
        let m = parse_inp(ONE_TET).unwrap();
        assert_eq!(m.nodes.len(), 4);
        assert_eq!(m.elements.len(), 1);
        assert_eq!(m.elements[0].nodes.as_slice(), &[1, 2, 3, 4]);
    }

    #[test]
    fn rejects_c3d10() {
        let text = ONE_TET.replace("C3D4", "C3D10");
        assert_eq!(parse_inp(&text), Err(InpError::UnsupportedElementType("C3D10".into())));
    }

    #[test]
    fn missing_sections_and_unknown_nodes() {
        assert_eq!(parse_inp("*NODE\n1, 0, 0, 0\n"), Err(InpError::MissingSection("*ELEMENT")));
        assert_eq!(parse_inp("*ELEMENT, TYPE=C3D4\n1, 1, 2, 3, 4\n"), Err(InpError::MissingSection("*NODE")));
        let bad = ONE_TET.replace("1, 1, 2, 3, 4", "1, 1, 2, 3, 9");
        assert_eq!(parse_inp(&bad), Err(InpError::UnknownNode { element: 1, node: 9 }));
    }

    #[test]
    fn continuation_generate_and_unknown_keywords() {
        let text = "*Heading\nsome title\n*Node\n1,0,0,0\n2,1,0,0\n3,1,1,0\n4,0,1,0\n5,0,0,1\n6,1,0,1\n7,1,1,1\n8,0,1,1\n\
                    *Element, type=C3D8R, elset=Brick\n1, 1, 2, 3, 4,\n5, 6, 7, 8\n*Elset, elset=All, generate\n1, 1, 1\n*Boundary\n1, 1, 3\n";
        let m = parse_inp(text).unwrap();
        assert_eq!(m.elements[0].nodes.len(), 8);
        assert_eq!(m.elset("Brick"), Some(&[1u64][..]));
        assert_eq!(m.elset("All"), Some(&[1u64][..]));
        assert_eq!(m.ignored_keywords, vec!["BOUNDARY".to_string()]);
    }

    #[test]
    fn round_trip() {
        let mut m = parse_inp(ONE_TET).unwrap();
        m.nodes[1].position.x = 0.1 + 0.2;
        m.elsets.push(("rigid".into(), vec![1]));
        m.materials.push(MaterialCard::rigid());
        m.sections.push(Section { elset: "rigid".into(), material: "rigid".into() });
        assert_eq!(parse_inp(&write_inp(&m)).unwrap(), m);
    }
}
