//! Material identifiers and the name/color table carried with every design.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense material index into a [`MaterialTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaterialId(pub u16);

impl fmt::Display for MaterialId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Material {
    pub id: MaterialId,
    pub name: String,
    /// RGBA, 8 bits per channel.
    pub color: [u8; 4],
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaterialError {
    #[error("unknown material '{0}'")]
    UnknownName(String),
    #[error("unknown material id {0}")]
    UnknownId(u16),
    #[error("duplicate material name '{0}'")]
    DuplicateName(String),
    #[error("material ids must be dense 0..n-1, found {found} at position {position}")]
    NonDenseId { position: usize, found: u16 },
}

/// Ordered material list. Ids are dense `0..n-1` and names are unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaterialTable {
    materials: Vec<Material>,
}

const DEFAULTS: &[(&str, [u8; 4])] = &[
    ("red", [255, 0, 0, 255]),
    ("green", [0, 255, 0, 255]),
    ("blue", [0, 0, 255, 255]),
    ("cyan", [0, 255, 255, 255]),
    ("magenta", [255, 0, 255, 255]),
    ("yellow", [255, 255, 0, 255]),
    ("white", [255, 255, 255, 255]),
    ("black", [0, 0, 0, 255]),
    ("gray", [128, 128, 128, 255]),
    ("clear", [230, 230, 230, 64]),
    ("rigid", [200, 200, 200, 255]),
    ("soft", [40, 40, 40, 255]),
];

impl MaterialTable {
    /// Builds a table from `(name, color)` pairs; ids follow list order.
    pub fn new<S: Into<String>>(entries: impl IntoIterator<Item = (S, [u8; 4])>) -> Result<Self, MaterialError> {
        let mut materials: Vec<Material> = Vec::new();
        for (i, (name, color)) in entries.into_iter().enumerate() {
            let name = name.into();
            if materials.iter().any(|m| m.name == name) {
                return Err(MaterialError::DuplicateName(name));
            }
            materials.push(Material { id: MaterialId(i as u16), name, color });
        }
        Ok(MaterialTable { materials })
    }

    /// Validates an explicit list, e.g. one read back from JSON.
    pub fn from_materials(materials: Vec<Material>) -> Result<Self, MaterialError> {
        for (i, m) in materials.iter().enumerate() {
            if m.id.0 as usize != i {
                return Err(MaterialError::NonDenseId { position: i, found: m.id.0 });
            }
            if materials[..i].iter().any(|o| o.name == m.name) {
                return Err(MaterialError::DuplicateName(m.name.clone()));
            }
        }
        Ok(MaterialTable { materials })
    }

    pub fn default_materials() -> Self {
        MaterialTable::new(DEFAULTS.iter().map(|(n, c)| (*n, *c))).expect("default table is valid")
    }

    pub fn id(&self, name: &str) -> Result<MaterialId, MaterialError> {
        self.materials
            .iter()
            .find(|m| m.name == name)
            .map(|m| m.id)
            .ok_or_else(|| MaterialError::UnknownName(name.to_string()))
    }

    pub fn get(&self, id: MaterialId) -> Result<&Material, MaterialError> {
        self.materials.get(id.0 as usize).ok_or(MaterialError::UnknownId(id.0))
    }

    pub fn name(&self, id: MaterialId) -> Option<&str> {
        self.materials.get(id.0 as usize).map(|m| m.name.as_str())
    }

    pub fn color(&self, id: MaterialId) -> Option<[u8; 4]> {
        self.materials.get(id.0 as usize).map(|m| m.color)
    }

    pub fn len(&self) -> usize {
        self.materials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.materials.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Material> {
        self.materials.iter()
    }
}

impl Default for MaterialTable {
    fn default() -> Self {
        MaterialTable::default_materials()
    }
}
