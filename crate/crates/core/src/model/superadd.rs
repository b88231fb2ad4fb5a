use alloc::format;
use alloc::vec::Vec;

use super::ModelError;

/// Largest player count accepted by the exhaustive superadditivity check.
pub const SUPERADDITIVITY_MAX_N: usize = 12;

/// Values of an auxiliary score on every subset of `0..n`, indexed by bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetTable {
    n: usize,
    values: Vec<f64>,
}

impl SubsetTable {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self, ModelError> {
        if n > SUPERADDITIVITY_MAX_N {
            return Err(ModelError::InvalidTable(format!(
                "n = {n} exceeds {SUPERADDITIVITY_MAX_N}"
            )));
        }
        if values.len() != 1 << n {
            return Err(ModelError::InvalidTable(format!(
                "expected {} entries, got {}",
                1usize << n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidTable("non-finite entry".into()));
        }
        Ok(SubsetTable { n, values })
    }

    pub fn from_fn(n: usize, f: impl Fn(u32) -> f64) -> Result<Self, ModelError> {
        if n > SUPERADDITIVITY_MAX_N {
            return Err(ModelError::InvalidTable(format!(
                "n = {n} exceeds {SUPERADDITIVITY_MAX_N}"
            )));
        }
        Self::new(n, (0..1u32 << n).map(f).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, mask: u32) -> f64 {
        self.values[mask as usize]
    }

    pub fn full(&self) -> u32 {
        (1u32 << self.n) - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Superadditivity {
    pub holds: bool,
    /// First disjoint pair `(s1, s2)` with `f(s1) + f(s2) > f(s1 | s2)`.
    pub witness: Option<(u32, u32)>,
}

/// Checks `f(S1) + f(S2) <= f(S1 u S2)` for all disjoint non-empty `S1 < S2`.
pub fn auxiliary_score_is_superadditive(table: &SubsetTable, tolerance: f64) -> Superadditivity {
    let full = table.full();
    for s1 in 1..=full {
        let rest = full & !s1;
        // Enumerate submasks of the complement that are larger than s1.
        let mut s2 = rest;
        while s2 != 0 {
            if s2 > s1 && table.get(s1) + table.get(s2) > table.get(s1 | s2) + tolerance {
                // Keep scanning for the smallest s2 for this s1.
                let mut best = s2;
                let mut t = (s2 - 1) & rest;
                while t != 0 {
                    if t > s1 && table.get(s1) + table.get(t) > table.get(s1 | t) + tolerance {
                        best = t;
                    }
                    t = (t - 1) & rest;
                }
                return Superadditivity {
                    holds: false,
                    witness: Some((s1, best)),
                };
            }
            s2 = (s2 - 1) & rest;
        }
    }
    Superadditivity {
        holds: true,
        witness: None,
    }
}
