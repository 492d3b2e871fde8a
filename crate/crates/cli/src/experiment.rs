//! Experiment files: one TOML document naming the data, the training-set
//! composition, the split scheme, the network and the training settings.
//!
//! ```toml
//! name = "set2-loso"
//! eval_manifest = "data/manifest.csv"
//! extra_manifest = "extra/manifest.csv"   # optional, used by set-3
//! network = "net.cfg"                      # optional, built-in network otherwise
//! out = "runs/set2-loso"
//! jobs = 4
//! save_checkpoints = false
//!
//! [composition]
//! kind = "set-2"
//!
//! [scheme]
//! kind = "loso"
//!
//! [train]
//! epochs = 50
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use hep2_core::data::DatasetManifest;
use hep2_core::eval::SplitScheme;
use hep2_core::nn::{save_checkpoint, NetworkConfig};
use hep2_core::train::{run_experiment, Composition, ExperimentSpec, TrainConfig};

use crate::commands::checkpoint_name;
use crate::staging::staged;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub name: String,
    pub eval_manifest: PathBuf,
    #[serde(default)]
    pub extra_manifest: Option<PathBuf>,
    #[serde(default)]
    pub network: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "one")]
    pub jobs: usize,
    #[serde(default)]
    pub save_checkpoints: bool,
    pub composition: Composition,
    pub scheme: SplitScheme,
    #[serde(default)]
    pub train: TrainConfig,
}

fn one() -> usize {
    1
}

impl ExperimentFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut file: ExperimentFile = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut file.eval_manifest);
        file.extra_manifest.as_mut().map(resolve);
        file.network.as_mut().map(resolve);
        file.out.as_mut().map(resolve);
        Ok(file)
    }
}

pub fn run(config: &Path, out: Option<PathBuf>, jobs: Option<usize>) -> Result<()> {
    let mut file = ExperimentFile::load(config)?;
    if out.is_some() {
        file.out = out;
    }
    if let Some(j) = jobs {
        file.jobs = j;
    }
    let out = file
        .out
        .clone()
        .context("no output directory: set `out` in the file, --out or HEP2_OUT")?;
    let network = match &file.network {
        Some(p) => NetworkConfig::load(p)?,
        None => NetworkConfig::hep2_default(),
    };
    log::info!("resolved experiment:\n{}", toml::to_string(&file)?);

    let eval = DatasetManifest::read(&file.eval_manifest)?.load_records(true)?;
    let extra = match (&file.extra_manifest, file.composition.uses_extra()) {
        (Some(p), true) => DatasetManifest::read(p)?.load_records(true)?,
        (Some(_), false) => {
            log::warn!("extra_manifest is ignored by composition {}", file.composition);
            Vec::new()
        }
        (None, _) => Vec::new(),
    };
    let spec = ExperimentSpec {
        name: file.name.clone(),
        composition: file.composition.clone(),
        scheme: file.scheme,
        network: network.clone(),
        train: file.train.clone(),
        jobs: file.jobs,
    };

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    staged(&out, "experiment", |stage| {
        fs::write(stage.join("experiment.toml"), toml::to_string(&file)?)?;
        fs::write(stage.join("network.cfg"), network.to_text())?;
        let outcome = run_experiment(&spec, &eval, &extra)?;
        fs::write(stage.join("split.json"), outcome.plan.to_json())?;
        let report = outcome.report()?;
        report.write(stage.path())?;
        let mut folds = String::from("fold,train_size,test_size,completed,accuracy,seconds\n");
        for f in &outcome.folds {
            let acc = f.accuracy().map(|a| format!("{a:.4}")).unwrap_or_default();
            writeln!(
                folds,
                "{},{},{},{},{acc},{:.1}",
                f.fold, f.train_size, f.test_size, f.completed, f.seconds
            )?;
            if file.save_checkpoints {
                let dir = stage.join(format!("fold_{:03}", f.fold));
                fs::create_dir_all(&dir)?;
                for (epoch, params) in &f.checkpoints {
                    save_checkpoint(dir.join(checkpoint_name(*epoch)), &network, params)?;
                }
            }
        }
        fs::write(stage.join("folds.csv"), folds)?;
        println!("{}", report.summary());
        Ok(())
    })
}
