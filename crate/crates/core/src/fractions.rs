//! Per-point material volume fractions.

use smallvec::SmallVec;

use crate::material::MaterialId;

/// Tolerance on the fraction sum.
pub const SUM_EPS: f64 = 1e-9;

/// Material id to volume fraction, sorted by id with no duplicate ids.
///
/// Inside an object the fractions sum to 1; the empty set marks the exterior.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FractionSet {
    entries: SmallVec<[(MaterialId, f64); 4]>,
}

impl FractionSet {
    pub fn empty() -> Self {
        FractionSet::default()
    }

    pub fn single(material: MaterialId) -> Self {
        let mut entries = SmallVec::new();
        entries.push((material, 1.0));
        FractionSet { entries }
    }

    /// Clamps each weight to `[0, 1]` (NaN counts as 0), merges repeated ids
    /// and renormalizes. Returns `None` when nothing positive remains.
    pub fn from_weights(weights: impl IntoIterator<Item = (MaterialId, f64)>) -> Option<Self> {
        let mut entries: SmallVec<[(MaterialId, f64); 4]> = SmallVec::new();
        for (m, w) in weights {
            let w = if w.is_nan() { 0.0 } else { w.clamp(0.0, 1.0) };
            match entries.binary_search_by_key(&m, |e| e.0) {
                Ok(i) => entries[i].1 += w,
                Err(i) => entries.insert(i, (m, w)),
            }
        }
        let sum: f64 = entries.iter().map(|e| e.1).sum();
        if sum <= 0.0 {
            return None;
        }
        for e in entries.iter_mut() {
            e.1 /= sum;
        }
        Some(FractionSet { entries })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Fraction of `m`, zero when absent.
    pub fn get(&self, m: MaterialId) -> f64 {
        match self.entries.binary_search_by_key(&m, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Entries in ascending material-id order.
    pub fn iter(&self) -> impl Iterator<Item = (MaterialId, f64)> + '_ {
        self.entries.iter().copied()
    }

    /// Material with the largest fraction; ties go to the lowest id.
    pub fn dominant(&self) -> Option<MaterialId> {
        let mut best: Option<(MaterialId, f64)> = None;
        for &(m, f) in &self.entries {
            if best.is_none_or(|(_, bf)| f > bf) {
                best = Some((m, f));
            }
        }
        best.map(|b| b.0)
    }
}
