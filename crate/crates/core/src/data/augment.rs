//! Rotation/mirror augmentation and specimen-balanced subsampling.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::record::{class_name, CellRecord, PatternClass, Provenance};
use crate::data::transform::{mirror, rotate};
use crate::error::{Error, Result};

/// Orientation of `cell` transformed into each of the first `count` orientations
/// of [`Provenance::all`].
fn variants(cell: &CellRecord, count: usize) -> impl Iterator<Item = CellRecord> + '_ {
    Provenance::all().into_iter().take(count).map(move |p| {
        let rotated = rotate(cell, p.quarter_turns());
        if p.is_mirrored() {
            mirror(&rotated)
        } else {
            rotated
        }
    })
}

/// All eight orientations of every cell: four rotations, each also mirrored.
pub fn augment_x8(records: &[CellRecord]) -> Vec<CellRecord> {
    records.iter().flat_map(|r| variants(r, 8)).collect()
}

/// Per-class augmentation multipliers, each one of 1, 2, 4 or 8.
///
/// `x2` adds a 90 degree rotation, `x4` all three rotations, `x8` the
/// rotations plus the mirror image of each.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AugmentPolicy {
    multipliers: BTreeMap<usize, usize>,
}

impl AugmentPolicy {
    pub fn new(multipliers: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (class, m) in multipliers {
            if ![1, 2, 4, 8].contains(&m) {
                return Err(Error::config(format!(
                    "multiplier {m} for {} must be 1, 2, 4 or 8",
                    class_name(class)
                )));
            }
            map.insert(class, m);
        }
        Ok(AugmentPolicy { multipliers: map })
    }

    /// Same multiplier for classes `0..classes`.
    pub fn uniform(classes: usize, multiplier: usize) -> Result<Self> {
        Self::new((0..classes).map(|c| (c, multiplier)))
    }

    /// Doubling for the four large classes, x4 for NuMem and x8 for Golgi:
    /// the multipliers that reproduce the published augmented Task-2 counts.
    pub fn task2_table() -> Self {
        Self::new(PatternClass::ALL.iter().zip([2, 2, 2, 2, 4, 8]).map(|(c, m)| (c.id(), m)))
            .expect("valid multipliers")
    }

    pub fn multiplier(&self, class: usize) -> Option<usize> {
        self.multipliers.get(&class).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.multipliers.iter().map(|(&c, &m)| (c, m))
    }
}

impl TryFrom<String> for AugmentPolicy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AugmentPolicy> for String {
    fn from(p: AugmentPolicy) -> String {
        p.to_string()
    }
}

impl fmt::Display for AugmentPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .multipliers
            .iter()
            .map(|(&c, &m)| format!("{}=x{m}", class_name(c)))
            .collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for AugmentPolicy {
    type Err = Error;

    /// Accepts `task2`, `x8`, `none`, a positional list such as `2,2,2,2,4,8`,
    /// or named entries such as `Golgi=8,NuMem=x4`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "task2" => return Ok(Self::task2_table()),
            "x8" => return Self::uniform(6, 8),
            "none" | "x1" => return Self::uniform(6, 1),
            _ => {}
        }
        let parse_m = |v: &str| -> Result<usize> {
            v.trim()
                .trim_start_matches('x')
                .parse()
                .map_err(|_| Error::config(format!("bad multiplier `{v}`")))
        };
        let mut entries = Vec::new();
        for (i, part) in s.split(',').enumerate() {
            match part.split_once('=') {
                Some((name, m)) => entries.push((crate::data::record::parse_class(name)?, parse_m(m)?)),
                None => entries.push((i, parse_m(part)?)),
            }
        }
        Self::new(entries)
    }
}

/// Augment each class by its policy multiplier.
pub fn augment_task2_policy(records: &[CellRecord], policy: &AugmentPolicy) -> Result<Vec<CellRecord>> {
    let mut out = Vec::new();
    for r in records {
        let m = policy.multiplier(r.label).ok_or_else(|| {
            Error::config(format!("augmentation policy has no entry for {}", class_name(r.label)))
        })?;
        out.extend(variants(r, m));
    }
    Ok(out)
}

/// Indices of the records kept by [`build_set3`], grouped by specimen in
/// order of first appearance and ascending within each specimen.
pub fn set3_indices(records: &[CellRecord], per_specimen: usize, seed: u64) -> Result<Vec<usize>> {
    if per_specimen == 0 {
        return Err(Error::config("per_specimen must be at least 1"));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        groups
            .entry(r.specimen_id.as_str())
            .or_insert_with(|| {
                order.push(r.specimen_id.as_str());
                Vec::new()
            })
            .push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = Vec::new();
    for id in order {
        let members = &groups[id];
        let take = per_specimen.min(members.len());
        let mut picked: Vec<usize> = index::sample(&mut rng, members.len(), take)
            .into_iter()
            .map(|k| members[k])
            .collect();
        picked.sort_unstable();
        selected.extend(picked);
    }
    Ok(selected)
}

/// Uniformly sample up to `per_specimen` cells from every specimen without replacement.
pub fn build_set3(records: &[CellRecord], per_specimen: usize, seed: u64) -> Result<Vec<CellRecord>> {
    Ok(set3_indices(records, per_specimen, seed)?
        .into_iter()
        .map(|i| records[i].clone())
        .collect())
}
