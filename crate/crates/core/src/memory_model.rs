//! Element-count accounting of optimizer state.
//!
//! Counts cover only what an optimizer persists between steps (moments and
//! factors), not parameters, gradients or activations. For an `n x m` matrix:
//!
//! | optimizer          | 2-D          | 1-D (n) |
//! |--------------------|--------------|---------|
//! | Adam, LAMB         | `2nm`        | `2n`    |
//! | Adafactor (+ mom.) | `nm + n + m` | `2n`    |
//! | SM3 (+ mom.)       | `nm + n + m` | `2n`    |
//! | CAME               | `nm + 2(n+m)`| `3n`    |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Manifest bundled with the crate, see `data/bert_large.manifest`.
pub const BERT_LARGE_MANIFEST: &str = include_str!("../data/bert_large.manifest");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Adam,
    Lamb,
    Adafactor,
    Sm3,
    Came,
}

impl StateKind {
    pub const ALL: [StateKind; 5] = [
        StateKind::Adam,
        StateKind::Lamb,
        StateKind::Adafactor,
        StateKind::Sm3,
        StateKind::Came,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StateKind::Adam => "adam",
            StateKind::Lamb => "lamb",
            StateKind::Adafactor => "adafactor",
            StateKind::Sm3 => "sm3",
            StateKind::Came => "came",
        }
    }
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StateKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        StateKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown optimizer `{s}`"))
    }
}

/// State elements `kind` keeps for one parameter of shape `dims`.
///
/// A 2-D shape with a unit dimension is a vector and is counted as 1-D,
/// matching the unfactored layout the optimizers use for it.
pub fn state_elements(kind: StateKind, dims: &[usize]) -> Result<u64> {
    if dims.contains(&0) {
        return Err(Error::InvalidShape {
            rows: dims.first().copied().unwrap_or(0),
            cols: dims.get(1).copied().unwrap_or(1),
            reason: "dimensions must be positive",
        });
    }
    let count = match *dims {
        [n] | [n, 1] | [1, n] => {
            let n = n as u64;
            match kind {
                StateKind::Adam | StateKind::Lamb => 2 * n,
                StateKind::Adafactor | StateKind::Sm3 => 2 * n,
                StateKind::Came => 3 * n,
            }
        }
        [n, m] => {
            let (n, m) = (n as u64, m as u64);
            match kind {
                StateKind::Adam | StateKind::Lamb => 2 * n * m,
                StateKind::Adafactor | StateKind::Sm3 => n * m + n + m,
                StateKind::Came => n * m + 2 * (n + m),
            }
        }
        _ => return Err(Error::UnsupportedRank(dims.len())),
    };
    Ok(count)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub dims: Vec<usize>,
}

impl ManifestEntry {
    pub fn params(&self) -> u64 {
        self.dims.iter().map(|&d| d as u64).product()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeManifest {
    pub entries: Vec<ManifestEntry>,
    pub element_width_bytes: u32,
}

impl ShapeManifest {
    pub const DEFAULT_ELEMENT_WIDTH: u32 = 4;

    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        Self {
            entries,
            element_width_bytes: Self::DEFAULT_ELEMENT_WIDTH,
        }
    }

    /// Parses `name dims...` lines; `#` starts a comment, blank lines are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let line_no = idx + 1;
            let mut fields = line.split_whitespace();
            let name = fields.next().expect("nonempty line").to_string();
            let dims = fields
                .map(|f| match f.parse::<usize>() {
                    Ok(0) | Err(_) => Err(Error::ManifestParse {
                        line: line_no,
                        reason: format!("`{f}` is not a positive integer"),
                    }),
                    Ok(d) => Ok(d),
                })
                .collect::<Result<Vec<_>>>()?;
            match dims.len() {
                1 | 2 => entries.push(ManifestEntry { name, dims }),
                0 => {
                    return Err(Error::ManifestParse {
                        line: line_no,
                        reason: format!("entry `{name}` has no dimensions"),
                    })
                }
                k => {
                    return Err(Error::ManifestParse {
                        line: line_no,
                        reason: format!("entry `{name}` has {k} dimensions; only 1-D and 2-D are supported"),
                    })
                }
            }
        }
        Ok(Self::new(entries))
    }

    pub fn bert_large() -> Self {
        Self::parse(BERT_LARGE_MANIFEST).expect("bundled manifest parses")
    }

    /// Every dimension multiplied by `factor`.
    pub fn scaled(&self, factor: usize) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|e| ManifestEntry {
                    name: e.name.clone(),
                    dims: e.dims.iter().map(|d| d * factor).collect(),
                })
                .collect(),
            element_width_bytes: self.element_width_bytes,
        }
    }

    pub fn total_params(&self) -> u64 {
        self.entries.iter().map(ManifestEntry::params).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryMemory {
    pub name: String,
    pub dims: Vec<usize>,
    pub elements: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerMemory {
    pub optimizer: StateKind,
    pub total_elements: u64,
    pub total_bytes: u64,
    pub ratio_to_baseline: f64,
    pub breakdown: Vec<EntryMemory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub baseline: StateKind,
    pub element_width_bytes: u32,
    pub parameter_count: u64,
    pub optimizers: Vec<OptimizerMemory>,
}

impl MemoryReport {
    pub fn get(&self, kind: StateKind) -> &OptimizerMemory {
        self.optimizers
            .iter()
            .find(|o| o.optimizer == kind)
            .expect("every optimizer is reported")
    }

    pub fn total(&self, kind: StateKind) -> u64 {
        self.get(kind).total_elements
    }
}

/// Aggregates [`state_elements`] over the manifest for every optimizer.
pub fn report(manifest: &ShapeManifest, baseline: StateKind) -> Result<MemoryReport> {
    if manifest.entries.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let width = manifest.element_width_bytes as u64;
    let mut optimizers = Vec::with_capacity(StateKind::ALL.len());
    for kind in StateKind::ALL {
        let breakdown = manifest
            .entries
            .iter()
            .map(|e| {
                Ok(EntryMemory {
                    name: e.name.clone(),
                    dims: e.dims.clone(),
                    elements: state_elements(kind, &e.dims)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let total_elements = breakdown.iter().map(|b| b.elements).sum();
        optimizers.push(OptimizerMemory {
            optimizer: kind,
            total_elements,
            total_bytes: total_elements * width,
            ratio_to_baseline: 0.0,
            breakdown,
        });
    }
    let base = optimizers
        .iter()
        .find(|o| o.optimizer == baseline)
        .map(|o| o.total_elements)
        .expect("baseline is one of the reported optimizers") as f64;
    for o in &mut optimizers {
        o.ratio_to_baseline = o.total_elements as f64 / base;
    }
    Ok(MemoryReport {
        baseline,
        element_width_bytes: manifest.element_width_bytes,
        parameter_count: manifest.total_params(),
        optimizers,
    })
}

impl fmt::Display for MemoryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "parameters: {}   element width: {} bytes   baseline: {}",
            self.parameter_count, self.element_width_bytes, self.baseline
        )?;
        writeln!(
            f,
            "{:<10} {:>16} {:>14} {:>10}",
            "optimizer", "state elements", "state MiB", "ratio"
        )?;
        for o in &self.optimizers {
            writeln!(
                f,
                "{:<10} {:>16} {:>14.2} {:>10.4}",
                o.optimizer.as_str(),
                o.total_elements,
                o.total_bytes as f64 / (1024.0 * 1024.0),
                o.ratio_to_baseline
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formula_examples() {
        let came = state_elements(StateKind::Came, &[1024, 1024]).unwrap();
        assert_eq!(came, 1_052_672);
        let adam = state_elements(StateKind::Adam, &[1024, 1024]).unwrap();
        assert_eq!(adam, 2_097_152);
        assert!((came as f64 / adam as f64 - 0.5020).abs() < 1e-4);
        assert_eq!(state_elements(StateKind::Adafactor, &[1, 1]).unwrap(), 2);
        assert_eq!(state_elements(StateKind::Adafactor, &[1]).unwrap(), 2);
        assert_eq!(state_elements(StateKind::Came, &[7]).unwrap(), 21);
        assert_eq!(state_elements(StateKind::Lamb, &[7]).unwrap(), 14);
        assert_eq!(state_elements(StateKind::Sm3, &[3, 5]).unwrap(), 23);
        assert!(matches!(
            state_elements(StateKind::Came, &[2, 3, 4]),
            Err(Error::UnsupportedRank(3))
        ));
        assert!(state_elements(StateKind::Came, &[]).is_err());
    }

    #[test]
    fn single_scalar_report() {
        let m = ShapeManifest::new(vec![ManifestEntry {
            name: "s".into(),
            dims: vec![1, 1],
        }]);
        let r = report(&m, StateKind::Adam).unwrap();
        assert_eq!(r.total(StateKind::Adam), 2);
        assert_eq!(r.get(StateKind::Adam).ratio_to_baseline, 1.0);
        assert_eq!(r.get(StateKind::Adam).total_bytes, 8);
    }

    #[test]
    fn empty_manifest_is_rejected() {
        assert_eq!(
            report(&ShapeManifest::new(vec![]), StateKind::Adam),
            Err(Error::EmptyManifest)
        );
    }

    #[test]
    fn parse_manifest_text() {
        let m = ShapeManifest::parse("# comment\nffn1 1024 4096\n\nbias 4096 # trailing\n").unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].dims, vec![1024, 4096]);
        assert_eq!(m.entries[1].name, "bias");
        assert!(matches!(
            ShapeManifest::parse("x 2 0"),
            Err(Error::ManifestParse { line: 1, .. })
        ));
        assert!(matches!(
            ShapeManifest::parse("ok 3\nbad 1 2 3"),
            Err(Error::ManifestParse { line: 2, .. })
        ));
        assert!(ShapeManifest::parse("lonely").is_err());
        assert!(ShapeManifest::parse("x two").is_err());
    }

    #[test]
    fn bundled_manifest_size() {
        let m = ShapeManifest::bert_large();
        assert_eq!(m.total_params(), 336_226_108);
        assert!(m.entries.iter().all(|e| e.dims.len() <= 2));
    }

    #[test]
    fn small_shapes_break_strict_ordering() {
        // 2(n + m) >= nm for 2x2 and 4x4, so CAME is not below Adam there
        for (n, m) in [(2, 2), (2, 100), (4, 4), (3, 6)] {
            let came = state_elements(StateKind::Came, &[n, m]).unwrap();
            let adam = state_elements(StateKind::Adam, &[n, m]).unwrap();
            assert!(came >= adam, "{n}x{m}");
        }
    }

    fn arb_manifest() -> impl Strategy<Value = Vec<ManifestEntry>> {
        prop::collection::vec(
            prop_oneof![
                (1usize..500).prop_map(|n| vec![n]),
                (1usize..500, 1usize..500).prop_map(|(n, m)| vec![n, m]),
            ],
            1..20,
        )
        .prop_map(|dims| {
            dims.into_iter()
                .enumerate()
                .map(|(i, dims)| ManifestEntry {
                    name: format!("p{i}"),
                    dims,
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn came_over_adam_ratio_for_large_matrices(n in 64usize..5000, m in 64usize..5000) {
            let came = state_elements(StateKind::Came, &[n, m]).unwrap() as f64;
            let adam = state_elements(StateKind::Adam, &[n, m]).unwrap() as f64;
            let ratio = came / adam;
            prop_assert!(ratio > 0.5 && ratio <= 0.55);
        }

        #[test]
        fn strict_ordering_when_factors_are_small(n in 2usize..2000, m in 2usize..2000) {
            // CAME < Adam exactly when 2(n + m) < nm, i.e. (n - 2)(m - 2) > 4
            prop_assume!((n - 2) * (m - 2) > 4);
            let ada = state_elements(StateKind::Adafactor, &[n, m]).unwrap();
            let came = state_elements(StateKind::Came, &[n, m]).unwrap();
            let adam = state_elements(StateKind::Adam, &[n, m]).unwrap();
            prop_assert!(ada < came && came < adam);
        }

        #[test]
        fn totals_are_permutation_invariant(entries in arb_manifest(), seed in any::<u64>()) {
            let mut shuffled = entries.clone();
            // deterministic rotation + reversal as the permutation
            let k = (seed as usize) % shuffled.len();
            shuffled.rotate_left(k);
            if seed % 2 == 0 {
                shuffled.reverse();
            }
            let a = report(&ShapeManifest::new(entries), StateKind::Adam).unwrap();
            let b = report(&ShapeManifest::new(shuffled), StateKind::Adam).unwrap();
            for kind in StateKind::ALL {
                prop_assert_eq!(a.total(kind), b.total(kind));
                let sum: u64 = a.get(kind).breakdown.iter().map(|e| e.elements).sum();
                prop_assert_eq!(sum, a.total(kind));
            }
        }

        #[test]
        fn scaling_grows_adam_quadratically_and_overhead_linearly(
            entries in arb_manifest(),
            k in 2usize..8,
        ) {
            let entries: Vec<ManifestEntry> = entries
                .into_iter()
                .filter(|e| e.dims.iter().all(|&d| d >= 2))
                .collect();
            prop_assume!(!entries.is_empty());
            let base = ShapeManifest::new(entries);
            let a = report(&base, StateKind::Adam).unwrap();
            let b = report(&base.scaled(k), StateKind::Adam).unwrap();
            let k = k as u64;
            let overhead = |r: &MemoryReport| r.total(StateKind::Came) - r.total(StateKind::Adafactor);
            prop_assert_eq!(overhead(&b), k * overhead(&a));
            let (adam_a, adam_b) = (a.total(StateKind::Adam), b.total(StateKind::Adam));
            prop_assert!(adam_b <= k * k * adam_a && adam_b >= k * adam_a);
            let matrix_only: u64 = base
                .entries
                .iter()
                .filter(|e| e.dims.len() == 2)
                .map(|e| state_elements(StateKind::Adam, &e.dims).unwrap())
                .sum();
            let vector_only = adam_a - matrix_only;
            prop_assert_eq!(adam_b, k * k * matrix_only + k * vector_only);
        }
    }
}
