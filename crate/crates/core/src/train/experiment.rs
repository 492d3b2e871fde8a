//! Cross-validated training and evaluation with a data-leakage guard.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::augment::{augment_task2_policy, augment_x8, set3_indices, AugmentPolicy};
use crate::data::record::CellRecord;
use crate::data::transform::resize_bilinear;
use crate::error::{Error, Result};
use crate::eval::confusion::ConfusionMatrix;
use crate::eval::report::EvalReport;
use crate::eval::split::{SplitPlan, SplitScheme};
use crate::nn::{NetworkConfig, Parameters};
use crate::train::ensemble::ensemble_predict_batch;
use crate::train::trainer::{train, TrainConfig};

/// How each fold's training set is assembled from the evaluation records on
/// the training side and an optional pool of extra records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Composition {
    /// Training-side evaluation records as they are.
    #[serde(rename = "set-1", alias = "set1")]
    Set1,
    /// Training-side evaluation records with all eight dihedral variants.
    #[serde(rename = "set-2", alias = "set2")]
    Set2,
    /// Training-side evaluation records plus a per-specimen sample of the extras.
    #[serde(rename = "set-3", alias = "set3")]
    Set3 { per_specimen: usize, seed: u64 },
    /// Training-side evaluation records plus the extras augmented by `policy`.
    Pooled { policy: AugmentPolicy },
}

impl Composition {
    pub fn uses_extra(&self) -> bool {
        matches!(self, Composition::Set3 { .. } | Composition::Pooled { .. })
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Composition::Set1 => f.write_str("set-1"),
            Composition::Set2 => f.write_str("set-2"),
            Composition::Set3 { per_specimen, seed } => write!(f, "set-3(per_specimen={per_specimen}, seed={seed})"),
            Composition::Pooled { policy } => write!(f, "pooled({policy})"),
        }
    }
}

impl FromStr for Composition {
    type Err = Error;

    /// `set-1`, `set-2`, `set-3` (1000 cells per specimen, seed 0) or
    /// `pooled:<policy>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "set-1" | "set1" => Ok(Composition::Set1),
            "set-2" | "set2" => Ok(Composition::Set2),
            "set-3" | "set3" => Ok(Composition::Set3 { per_specimen: 1000, seed: 0 }),
            other => match other.strip_prefix("pooled:") {
                Some(policy) => Ok(Composition::Pooled { policy: policy.parse()? }),
                None => Err(Error::config(format!(
                    "unknown composition `{s}` (expected set-1, set-2, set-3 or pooled:<policy>)"
                ))),
            },
        }
    }
}

/// Where a training record came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Origin {
    /// Index into the evaluation records.
    Eval(usize),
    /// Index into the extra records.
    Extra(usize),
}

/// A training record tagged with the source record it derives from.
#[derive(Clone, Debug)]
pub struct TrainItem {
    pub origin: Origin,
    pub record: CellRecord,
}

/// Training set of one fold.
pub fn compose_fold(
    composition: &Composition,
    eval: &[CellRecord],
    train_indices: &[usize],
    extra: &[CellRecord],
) -> Result<Vec<TrainItem>> {
    let base = train_indices.iter().map(|&i| TrainItem {
        origin: Origin::Eval(i),
        record: eval[i].clone(),
    });
    let mut items: Vec<TrainItem> = match composition {
        Composition::Set2 => train_indices
            .iter()
            .flat_map(|&i| {
                augment_x8(std::slice::from_ref(&eval[i]))
                    .into_iter()
                    .map(move |record| TrainItem {
                        origin: Origin::Eval(i),
                        record,
                    })
            })
            .collect(),
        _ => base.collect(),
    };
    match composition {
        Composition::Set3 { per_specimen, seed } => {
            for j in set3_indices(extra, *per_specimen, *seed)? {
                items.push(TrainItem {
                    origin: Origin::Extra(j),
                    record: extra[j].clone(),
                });
            }
        }
        Composition::Pooled { policy } => {
            for (j, r) in extra.iter().enumerate() {
                for record in augment_task2_policy(std::slice::from_ref(r), policy)? {
                    items.push(TrainItem {
                        origin: Origin::Extra(j),
                        record,
                    });
                }
            }
        }
        Composition::Set1 | Composition::Set2 => {}
    }
    Ok(items)
}

/// Refuse a fold whose training set touches its test set.
///
/// No training item may derive from a test record, and under a grouped
/// scheme no training item may share a specimen with a test record.
pub fn check_leakage(
    fold: usize,
    scheme: &SplitScheme,
    eval: &[CellRecord],
    test_indices: &[usize],
    train: &[TrainItem],
) -> Result<()> {
    let test: HashSet<usize> = test_indices.iter().copied().collect();
    if let Some(item) = train
        .iter()
        .find(|t| matches!(t.origin, Origin::Eval(i) if test.contains(&i)))
    {
        let Origin::Eval(i) = item.origin else { unreachable!() };
        return Err(Error::Leakage {
            fold,
            message: format!("training set contains test record {i} ({})", item.record.provenance),
        });
    }
    if scheme.is_grouped() {
        let specimens: HashSet<&str> = test_indices.iter().map(|&i| eval[i].specimen_id.as_str()).collect();
        if let Some(item) = train.iter().find(|t| specimens.contains(t.record.specimen_id.as_str())) {
            return Err(Error::Leakage {
                fold,
                message: format!("test specimen `{}` also appears in training", item.record.specimen_id),
            });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub composition: Composition,
    pub scheme: SplitScheme,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    /// Number of folds trained concurrently.
    pub jobs: usize,
}

#[derive(Clone, Debug)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub confusion: ConfusionMatrix,
    pub completed: bool,
    pub seconds: f64,
    /// Mean training loss per epoch.
    pub epoch_loss: Vec<f64>,
    pub checkpoints: Vec<(usize, Parameters<f32>)>,
}

impl FoldResult {
    pub fn accuracy(&self) -> Option<f64> {
        if self.completed {
            self.confusion.accuracy()
        } else {
            None
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub spec: ExperimentSpec,
    pub plan: SplitPlan,
    pub folds: Vec<FoldResult>,
    /// Sum of the confusion matrices of completed folds.
    pub confusion: ConfusionMatrix,
}

impl ExperimentOutcome {
    pub fn report(&self) -> Result<EvalReport> {
        let accs = self.folds.iter().map(FoldResult::accuracy).collect();
        EvalReport::new(
            format!("{} / {}", self.spec.composition, self.spec.scheme),
            self.confusion.clone(),
            accs,
        )
    }
}

fn to_input_side(records: &[CellRecord], side: usize) -> Result<Vec<CellRecord>> {
    records
        .iter()
        .map(|r| {
            if r.side() == side {
                Ok(r.clone())
            } else {
                resize_bilinear(r, side)
            }
        })
        .collect()
}

/// Plan the folds, train one ensemble per fold and pool the test predictions.
///
/// Folds are independent and run on up to `spec.jobs` threads; results are
/// merged in fold order so the outcome does not depend on `jobs`.
pub fn run_experiment(spec: &ExperimentSpec, eval: &[CellRecord], extra: &[CellRecord]) -> Result<ExperimentOutcome> {
    spec.network.validate()?;
    spec.train.validate()?;
    if eval.is_empty() {
        return Err(Error::Data("no evaluation records".into()));
    }
    if spec.composition.uses_extra() && extra.is_empty() {
        return Err(Error::Data(format!("{} needs extra training records", spec.composition)));
    }
    let [_, h, w] = spec.network.input_shape;
    if h != w {
        return Err(Error::config("network input must be square"));
    }
    let k = spec.network.num_classes;
    for (index, r) in eval.iter().chain(extra).enumerate() {
        if r.label >= k {
            return Err(Error::Record {
                index,
                message: format!("label {} outside [0, {k})", r.label),
            });
        }
    }
    let plan = SplitPlan::for_scheme(spec.scheme, eval)?;
    plan.check_partition(eval.len())?;
    let eval = to_input_side(eval, h)?;
    let extra = to_input_side(extra, h)?;
    log::info!(
        "experiment `{}`: {} on {} folds, {} eval records, {} extra records",
        spec.name,
        spec.composition,
        plan.folds.len(),
        eval.len(),
        extra.len()
    );

    let run_fold = |f: usize| -> Result<FoldResult> {
        let fold = &plan.folds[f];
        let started = Instant::now();
        let items = compose_fold(&spec.composition, &eval, &fold.train, &extra)?;
        check_leakage(f, &spec.scheme, &eval, &fold.test, &items)?;
        let trainset: Vec<CellRecord> = items.into_iter().map(|t| t.record).collect();
        let run = train(&spec.network, &spec.train, &trainset)?;
        let mut confusion = ConfusionMatrix::new(k);
        if run.completed {
            let test: Vec<CellRecord> = fold.test.iter().map(|&i| eval[i].clone()).collect();
            let preds = ensemble_predict_batch(&spec.network, &run.checkpoint_params(), &test, spec.train.batch_size)?;
            for (r, (pred, _)) in test.iter().zip(preds) {
                confusion.accumulate(r.label, pred)?;
            }
        } else {
            log::warn!("fold {f} exceeded its time budget and is marked incomplete");
        }
        let result = FoldResult {
            fold: f,
            train_size: trainset.len(),
            test_size: fold.test.len(),
            confusion,
            completed: run.completed,
            seconds: started.elapsed().as_secs_f64(),
            epoch_loss: run.epoch_loss,
            checkpoints: run.checkpoints,
        };
        log::info!(
            "fold {f}: {} train, {} test, accuracy {}",
            result.train_size,
            result.test_size,
            result.accuracy().map_or("n/a".to_string(), |a| format!("{a:.2}"))
        );
        Ok(result)
    };

    let jobs = spec.jobs.max(1);
    let folds: Vec<FoldResult> = if jobs == 1 {
        (0..plan.folds.len()).map(run_fold).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
        pool.install(|| (0..plan.folds.len()).into_par_iter().map(run_fold).collect::<Result<_>>())?
    };

    let mut confusion = ConfusionMatrix::new(k);
    for f in folds.iter().filter(|f| f.completed) {
        confusion.merge(&f.confusion)?;
    }
    Ok(ExperimentOutcome {
        spec: spec.clone(),
        plan,
        folds,
        confusion,
    })
}
