//! Leave-one-specimen-out and k-fold split planning.

use std::collections::HashMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::record::CellRecord;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SplitScheme {
    Loso,
    KFold { k: usize, seed: u64 },
}

impl SplitScheme {
    /// Whether the scheme keeps each specimen on one side of every fold.
    pub fn is_grouped(&self) -> bool {
        matches!(self, SplitScheme::Loso)
    }
}

impl fmt::Display for SplitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitScheme::Loso => f.write_str("loso"),
            SplitScheme::KFold { k, seed } => write!(f, "kfold(k={k}, seed={seed})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    /// Ascending record indices.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub scheme: SplitScheme,
    pub folds: Vec<Fold>,
}

impl SplitPlan {
    /// Build the plan `scheme` describes for `records`.
    pub fn for_scheme(scheme: SplitScheme, records: &[CellRecord]) -> Result<Self> {
        match scheme {
            SplitScheme::Loso => plan_loso(records),
            SplitScheme::KFold { k, seed } => plan_kfold(records, k, seed),
        }
    }

    /// Check that every fold partitions `0..n` and every index is tested exactly once.
    pub fn check_partition(&self, n: usize) -> Result<()> {
        let mut tested = vec![0usize; n];
        for (f, fold) in self.folds.iter().enumerate() {
            let mut side = vec![0u8; n];
            for &i in fold.train.iter().chain(&fold.test) {
                if i >= n {
                    return Err(Error::Internal(format!("fold {f} references record {i} of {n}")));
                }
                side[i] += 1;
            }
            if side.iter().any(|&s| s != 1) {
                return Err(Error::Internal(format!("fold {f} does not partition the records")));
            }
            for &i in &fold.test {
                tested[i] += 1;
            }
        }
        if tested.iter().any(|&t| t != 1) {
            return Err(Error::Internal("some record is not tested exactly once".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut in_test = vec![false; n];
    for &i in test {
        in_test[i] = true;
    }
    (0..n).filter(|&i| !in_test[i]).collect()
}

/// One fold per distinct specimen id, ordered by first appearance.
pub fn plan_loso(records: &[CellRecord]) -> Result<SplitPlan> {
    let ids: Vec<&str> = records.iter().map(|r| r.specimen_id.as_str()).collect();
    plan_loso_ids(&ids)
}

/// [`plan_loso`] over bare specimen ids.
pub fn plan_loso_ids(specimen_ids: &[&str]) -> Result<SplitPlan> {
    if specimen_ids.is_empty() {
        return Err(Error::config("cannot plan splits for an empty dataset"));
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for (i, &id) in specimen_ids.iter().enumerate() {
        let g = *slot.entry(id).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    let n = specimen_ids.len();
    let folds = groups
        .into_iter()
        .map(|test| Fold {
            train: complement(n, &test),
            test,
        })
        .collect();
    Ok(SplitPlan {
        scheme: SplitScheme::Loso,
        folds,
    })
}

/// Seeded record-level k-fold split that ignores specimen identity.
///
/// The first `n % k` folds receive one extra record.
pub fn plan_kfold(records: &[CellRecord], k: usize, seed: u64) -> Result<SplitPlan> {
    plan_kfold_n(records.len(), k, seed)
}

pub fn plan_kfold_n(n: usize, k: usize, seed: u64) -> Result<SplitPlan> {
    if k < 2 || k > n {
        return Err(Error::config(format!("k = {k} must lie in [2, {n}]")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        let mut test = order[start..start + size].to_vec();
        test.sort_unstable();
        start += size;
        folds.push(Fold {
            train: complement(n, &test),
            test,
        });
    }
    Ok(SplitPlan {
        scheme: SplitScheme::KFold { k, seed },
        folds,
    })
}
