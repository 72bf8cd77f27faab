//! Expression-driven material grading shared by `FGrade`, per-strut lattice
//! grades and simulation fields.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use smallvec::SmallVec;

use crate::design::DesignError;
use crate::expr::ExprProgram;
use crate::fractions::FractionSet;
use crate::material::MaterialId;

/// One expression per material, evaluated against a fixed variable layout.
#[derive(Debug, Clone)]
pub struct Grading {
    exprs: Vec<ExprProgram>,
    slot_maps: Vec<SmallVec<[usize; 4]>>,
    materials: Vec<MaterialId>,
    probabilistic: bool,
    nan_events: Arc<AtomicU64>,
}

impl PartialEq for Grading {
    fn eq(&self, other: &Self) -> bool {
        self.exprs == other.exprs && self.materials == other.materials && self.probabilistic == other.probabilistic
    }
}

impl Grading {
    /// `variables` fixes the slot layout later passed to [`Grading::eval`].
    pub fn new(
        exprs: Vec<ExprProgram>,
        materials: Vec<MaterialId>,
        probabilistic: bool,
        variables: &[&str],
    ) -> Result<Self, DesignError> {
        if exprs.len() != materials.len() {
            return Err(DesignError::GradeArity { expressions: exprs.len(), materials: materials.len() });
        }
        if exprs.is_empty() {
            return Err(DesignError::InvalidParameter("grading needs at least one expression".into()));
        }
        let mut slot_maps = Vec::with_capacity(exprs.len());
        for (index, e) in exprs.iter().enumerate() {
            if let Some(name) = e.unbound_in(variables) {
                return Err(DesignError::UnboundVariable {
                    index,
                    name: name.to_string(),
                    allowed: variables.iter().map(|s| s.to_string()).collect(),
                });
            }
            let map = e.slot_map(variables).expect("checked above");
            slot_maps.push(map.into_iter().collect());
        }
        Ok(Grading { exprs, slot_maps, materials, probabilistic, nan_events: Arc::default() })
    }

    /// Parses expression strings, tagging failures with their index.
    pub fn parse(
        sources: &[impl AsRef<str>],
        materials: Vec<MaterialId>,
        probabilistic: bool,
        variables: &[&str],
    ) -> Result<Self, DesignError> {
        let exprs = sources
            .iter()
            .enumerate()
            .map(|(index, s)| ExprProgram::parse(s.as_ref()).map_err(|source| DesignError::Expr { index, source }))
            .collect::<Result<Vec<_>, _>>()?;
        Grading::new(exprs, materials, probabilistic, variables)
    }

    pub fn expressions(&self) -> &[ExprProgram] {
        &self.exprs
    }

    pub fn materials(&self) -> &[MaterialId] {
        &self.materials
    }

    pub fn probabilistic(&self) -> bool {
        self.probabilistic
    }

    /// Number of NaN expression results seen so far (each treated as 0).
    pub fn nan_events(&self) -> u64 {
        self.nan_events.load(Ordering::Relaxed)
    }

    /// Evaluates every expression, clamps to `[0,1]` and renormalizes.
    ///
    /// Returns `None` when every expression is zero or below. In threshold
    /// mode the result collapses onto the dominant material.
    pub fn eval(&self, env: &[f64]) -> Option<FractionSet> {
        let mut weights: SmallVec<[(MaterialId, f64); 4]> = SmallVec::new();
        for ((e, map), &m) in self.exprs.iter().zip(&self.slot_maps).zip(&self.materials) {
            let mut slots: SmallVec<[f64; 4]> = SmallVec::new();
            slots.extend(map.iter().map(|&i| env[i]));
            let mut v = e.eval_slots(&slots);
            if v.is_nan() {
                self.nan_events.fetch_add(1, Ordering::Relaxed);
                v = 0.0;
            }
            weights.push((m, v));
        }
        let f = FractionSet::from_weights(weights)?;
        if self.probabilistic {
            Some(f)
        } else {
            f.dominant().map(FractionSet::single)
        }
    }
}
