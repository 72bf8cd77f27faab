//! Turning fraction sets into one discrete material per voxel or element.
//!
//! Random draws come from a stateless hash of the sample's integer key and
//! the job seed, so the result does not depend on evaluation order or
//! thread count.

use serde::{Deserialize, Serialize};

use crate::fractions::FractionSet;
use crate::material::MaterialId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Draw each material with probability equal to its fraction.
    Probabilistic,
    /// Always take the largest fraction, lowest id on ties.
    Threshold,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "prob" | "probabilistic" => Ok(Mode::Probabilistic),
            "thresh" | "threshold" => Ok(Mode::Threshold),
            _ => Err(format!("unknown mode '{s}' (expected prob or thresh)")),
        }
    }
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit hash of a 3D key and a seed. Each word passes through a full
/// SplitMix64 finalizer before the next is folded in.
#[inline]
pub fn hash(key: [u64; 3], seed: u64) -> u64 {
    const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut h = mix(seed.wrapping_add(GAMMA));
    for k in key {
        h = mix(h ^ k.wrapping_add(GAMMA));
    }
    h
}

/// Uniform draw in `[0, 1)` with 53 random bits.
#[inline]
pub fn unit(key: [u64; 3], seed: u64) -> f64 {
    (hash(key, seed) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Picks the material for one sample. Empty sets give `None`.
pub fn assign_material(f: &FractionSet, key: [u64; 3], seed: u64, mode: Mode) -> Option<MaterialId> {
    if f.is_empty() {
        return None;
    }
    match mode {
        Mode::Threshold => f.dominant(),
        Mode::Probabilistic => {
            let u = unit(key, seed) * f.sum();
            let mut acc = 0.0;
            let mut last = None;
            for (m, v) in f.iter() {
                if v <= 0.0 {
                    continue;
                }
                acc += v;
                last = Some(m);
                if u < acc {
                    return Some(m);
                }
            }
            last
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: MaterialId = MaterialId(0);
    const B: MaterialId = MaterialId(1);

    #[test]
    fn degenerate_distribution() {
        let f = FractionSet::single(A);
        for seed in 0..100 {
            assert_eq!(assign_material(&f, [seed, 1, 2], seed, Mode::Probabilistic), Some(A));
        }
        assert_eq!(assign_material(&FractionSet::empty(), [0, 0, 0], 0, Mode::Probabilistic), None);
    }

    #[test]
    fn threshold_is_argmax() {
        let f = FractionSet::from_weights([(A, 0.49), (B, 0.51)]).unwrap();
        for i in 0..100 {
            assert_eq!(assign_material(&f, [i, i, i], 7, Mode::Threshold), Some(B));
        }
        let tie = FractionSet::from_weights([(A, 0.5), (B, 0.5)]).unwrap();
        assert_eq!(assign_material(&tie, [0, 0, 0], 7, Mode::Threshold), Some(A));
    }

    #[test]
    fn unit_range_and_spread() {
        let mut sum = 0.0;
        let n = 100_000;
        for i in 0..n {
            let u = unit([i, 3, 5], 11);
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        assert!((sum / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn mode_names() {
        assert_eq!("prob".parse::<Mode>().unwrap(), Mode::Probabilistic);
        assert_eq!("thresh".parse::<Mode>().unwrap(), Mode::Threshold);
        assert!("x".parse::<Mode>().is_err());
    }
}
