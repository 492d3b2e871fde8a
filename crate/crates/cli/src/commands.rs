use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use hep2_core::data::transform::resize_bilinear;
use hep2_core::data::{
    augment_task2_policy, extract_cells, parse_class, write_manifest, AugmentPolicy, CellRecord, DatasetManifest,
    GrayImage, SegmentationMask, SpecimenImage,
};
use hep2_core::eval::{
    ccr_from_rows, mca, parse_confusion_rows, plan_kfold_n, plan_loso_ids, render_confusion, render_rows,
    ConfusionMatrix, EvalReport, SplitPlan, SplitScheme,
};
use hep2_core::nn::{load_checkpoint, save_checkpoint, NetworkConfig};
use hep2_core::synth::{generate, SynthSpec};
use hep2_core::train::{ensemble_predict_batch, train as train_network, TrainConfig};
use walkdir::WalkDir;

use crate::staging::staged;
use crate::{OutArg, Preset};

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "pgm", "pnm", "ppm"];

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// The mask at the specimen's relative path, allowing a different image extension.
fn find_mask(masks: &Path, relative: &Path) -> Result<PathBuf> {
    let direct = masks.join(relative);
    if direct.is_file() {
        return Ok(direct);
    }
    for ext in IMAGE_EXTENSIONS {
        let candidate = direct.with_extension(ext);
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    bail!("no mask for specimen {} under {}", relative.display(), masks.display())
}

pub fn extract(specimens: &Path, masks: &Path, side: usize, threshold: f32, out: &Path) -> Result<()> {
    let mut records = Vec::new();
    let mut files: Vec<PathBuf> = WalkDir::new(specimens)
        .sort_by_file_name()
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("listing {}", specimens.display()))?
        .into_iter()
        .map(|e| e.into_path())
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no specimen images under {}", specimens.display());
    }
    for path in files {
        let relative = path.strip_prefix(specimens)?.to_path_buf();
        let label_dir = relative
            .parent()
            .and_then(|p| p.file_name())
            .and_then(|n| n.to_str())
            .with_context(|| format!("{} is not inside a class directory", path.display()))?;
        let label = parse_class(label_dir).with_context(|| format!("class directory of {}", path.display()))?;
        let specimen_id = relative.with_extension("").to_string_lossy().replace(std::path::MAIN_SEPARATOR, "/");
        let specimen = SpecimenImage {
            pixels: GrayImage::load(&path, true)?,
            specimen_id,
            label,
        };
        let mask_image = GrayImage::load(find_mask(masks, &relative)?, true)?;
        let mask = SegmentationMask::from_image(&mask_image, threshold);
        let cells = extract_cells(&specimen, &mask, side)?;
        log::info!("{}: {} cells", specimen.specimen_id, cells.len());
        records.extend(cells);
    }
    staged(out, "extract", |stage| {
        let manifest = write_manifest(&records, stage.join("manifest.csv"))?;
        log::info!("wrote {} records", manifest.entries.len());
        Ok(())
    })
}

pub fn augment(manifest: &Path, policy: &str, out: &Path) -> Result<()> {
    let policy: AugmentPolicy = policy.parse()?;
    log::info!("policy: {policy}");
    let records = DatasetManifest::read(manifest)?.load_records(true)?;
    let augmented = augment_task2_policy(&records, &policy)?;
    staged(out, "augment", |stage| {
        write_manifest(&augmented, stage.join("manifest.csv"))?;
        log::info!("{} records augmented to {}", records.len(), augmented.len());
        Ok(())
    })
}

pub fn synth(spec: &SynthSpec, out: &Path) -> Result<()> {
    log::info!("synthetic spec: {spec:?}");
    let records = generate(spec)?;
    staged(out, "synth", |stage| {
        write_manifest(&records, stage.join("manifest.csv"))?;
        fs::write(stage.join("synth.toml"), toml::to_string(spec)?)?;
        log::info!("wrote {} records", records.len());
        Ok(())
    })
}

fn plan_for_manifest(manifest: &DatasetManifest, scheme: SplitScheme) -> Result<SplitPlan> {
    Ok(match scheme {
        SplitScheme::Loso => {
            let ids: Vec<&str> = manifest.entries.iter().map(|e| e.specimen_id.as_str()).collect();
            plan_loso_ids(&ids)?
        }
        SplitScheme::KFold { k, seed } => plan_kfold_n(manifest.entries.len(), k, seed)?,
    })
}

pub fn split(manifest_path: &Path, scheme: SplitScheme, out: &Path) -> Result<()> {
    let manifest = DatasetManifest::read(manifest_path)?;
    let plan = plan_for_manifest(&manifest, scheme)?;
    plan.check_partition(manifest.entries.len())?;
    staged(out, "split", |stage| {
        fs::write(stage.join("split.json"), plan.to_json())?;
        Ok(())
    })?;
    println!("{scheme}: {} folds over {} records", plan.folds.len(), manifest.entries.len());
    Ok(())
}

/// Records of a manifest, optionally restricted to one side of a split fold.
#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Split plan written by `split`; requires `--fold`.
    #[arg(long, requires = "fold")]
    pub split: Option<PathBuf>,
    #[arg(long, requires = "split")]
    pub fold: Option<usize>,
    /// Keep the images' native intensity range instead of scaling to [0, 1].
    #[arg(long)]
    pub raw_intensity: bool,
}

enum Side {
    Train,
    Test,
}

impl DataArgs {
    fn load(&self, side: Side, input_side: usize) -> Result<Vec<CellRecord>> {
        let records = DatasetManifest::read(&self.manifest)?.load_records(!self.raw_intensity)?;
        let selected = match (&self.split, self.fold) {
            (Some(path), Some(f)) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let plan = SplitPlan::from_json(&text)?;
                plan.check_partition(records.len())
                    .context("split plan does not match the manifest")?;
                let fold = plan
                    .folds
                    .get(f)
                    .with_context(|| format!("fold {f} out of range (plan has {} folds)", plan.folds.len()))?;
                let indices = match side {
                    Side::Train => &fold.train,
                    Side::Test => &fold.test,
                };
                indices.iter().map(|&i| records[i].clone()).collect()
            }
            _ => records,
        };
        selected
            .iter()
            .map(|r| {
                if r.side() == input_side {
                    Ok(r.clone())
                } else {
                    Ok(resize_bilinear(r, input_side)?)
                }
            })
            .collect()
    }
}

fn load_network(path: Option<&Path>) -> Result<NetworkConfig> {
    match path {
        Some(p) => Ok(NetworkConfig::load(p)?),
        None => Ok(NetworkConfig::hep2_default()),
    }
}

fn input_side(config: &NetworkConfig) -> Result<usize> {
    let [_, h, w] = config.input_shape;
    if h != w {
        bail!("network input must be square, got {h}x{w}");
    }
    Ok(h)
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Network config file; the built-in ten-layer network when omitted.
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "full")]
    pub preset: Preset,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f32>,
    #[arg(long)]
    pub init_std: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated epochs to checkpoint; the last three by default.
    #[arg(long, value_delimiter = ',')]
    pub checkpoint_epochs: Vec<usize>,
    /// Stop training after this many seconds.
    #[arg(long)]
    pub time_budget: Option<f64>,
    #[command(flatten)]
    pub out: OutArg,
}

impl TrainArgs {
    fn train_config(&self) -> TrainConfig {
        let mut t = match self.preset {
            Preset::Full => TrainConfig::default(),
            Preset::Desk => TrainConfig::desk_scale(),
        };
        if let Some(e) = self.epochs {
            t.epochs = e;
            t.checkpoint_epochs = TrainConfig::with_epochs(e).checkpoint_epochs;
        }
        if !self.checkpoint_epochs.is_empty() {
            t.checkpoint_epochs = self.checkpoint_epochs.iter().copied().collect::<BTreeSet<_>>();
        }
        t.batch_size = self.batch_size.unwrap_or(t.batch_size);
        t.learning_rate = self.lr.unwrap_or(t.learning_rate);
        t.init_std = self.init_std.unwrap_or(t.init_std);
        t.seed = self.seed;
        t.time_budget_secs = self.time_budget;
        t
    }
}

pub fn checkpoint_name(epoch: usize) -> String {
    format!("epoch_{epoch:03}.h2nn")
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let network = load_network(args.network.as_deref())?;
    network.validate()?;
    let tcfg = args.train_config();
    tcfg.validate()?;
    log::info!("network: {}", network.to_text().trim_end().replace('\n', "; "));
    log::info!("training config: {tcfg:?}");
    let records = args.data.load(Side::Train, input_side(&network)?)?;
    log::info!("training on {} records", records.len());
    staged(&args.out.out, "train", |stage| {
        fs::write(stage.join("network.cfg"), network.to_text())?;
        fs::write(stage.join("train_config.toml"), toml::to_string(&tcfg)?)?;
        let run = train_network(&network, &tcfg, &records)?;
        let mut log_csv = String::from("epoch,loss,accuracy\n");
        for (e, (loss, acc)) in run.epoch_loss.iter().zip(&run.epoch_accuracy).enumerate() {
            writeln!(log_csv, "{},{loss:.6},{acc:.2}", e + 1)?;
        }
        fs::write(stage.join("train_log.csv"), log_csv)?;
        for (epoch, params) in &run.checkpoints {
            save_checkpoint(stage.join(checkpoint_name(*epoch)), &network, params)?;
        }
        if !run.completed {
            bail!(
                "time budget exhausted after {} of {} epochs",
                run.epoch_loss.len(),
                tcfg.epochs
            );
        }
        log::info!("final epoch: loss {:.4}", run.epoch_loss.last().copied().unwrap_or(f64::NAN));
        Ok(())
    })
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Only compute per-class rates and the MCA of this confusion matrix.
    #[arg(long, conflicts_with_all = ["manifest", "checkpoints"])]
    pub confusion: Option<PathBuf>,
    #[arg(long, required_unless_present = "confusion")]
    pub manifest: Option<PathBuf>,
    #[arg(long, requires = "fold")]
    pub split: Option<PathBuf>,
    #[arg(long, requires = "split")]
    pub fold: Option<usize>,
    #[arg(long)]
    pub raw_intensity: bool,
    /// Directory of `.h2nn` checkpoints; all are averaged.
    #[arg(long, required_unless_present = "confusion")]
    pub checkpoints: Option<PathBuf>,
    /// Network config; defaults to `network.cfg` next to the checkpoints.
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long, env = "HEP2_OUT")]
    pub out: Option<PathBuf>,
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    if let Some(path) = &args.confusion {
        return eval_confusion(path);
    }
    let (Some(manifest), Some(dir)) = (&args.manifest, &args.checkpoints) else {
        bail!("--manifest and --checkpoints are required without --confusion");
    };
    let out = args.out.as_deref().context("--out (or HEP2_OUT) is required")?;
    let network_path = args.network.clone().unwrap_or_else(|| dir.join("network.cfg"));
    let network = NetworkConfig::load(&network_path)?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "h2nn"));
    paths.sort();
    if paths.is_empty() {
        bail!("no .h2nn checkpoints in {}", dir.display());
    }
    let checkpoints = paths
        .iter()
        .map(|p| load_checkpoint(p, &network))
        .collect::<Result<Vec<_>, _>>()?;
    log::info!("ensemble of {} checkpoints from {}", checkpoints.len(), dir.display());
    let data = DataArgs {
        manifest: manifest.clone(),
        split: args.split.clone(),
        fold: args.fold,
        raw_intensity: args.raw_intensity,
    };
    let records = data.load(Side::Test, input_side(&network)?)?;
    let predictions = ensemble_predict_batch(&network, &checkpoints, &records, 200)?;
    let mut cm = ConfusionMatrix::new(network.num_classes);
    let mut csv = String::from("index,label,predicted\n");
    for (i, (r, (pred, _))) in records.iter().zip(&predictions).enumerate() {
        cm.accumulate(r.label, *pred)?;
        writeln!(csv, "{i},{},{pred}", r.label)?;
    }
    let accuracy = cm.accuracy();
    let scheme = match args.fold {
        Some(f) => format!("fold {f}"),
        None => "all records".into(),
    };
    let report = EvalReport::new(scheme, cm, vec![accuracy])?;
    staged(out, "eval", |stage| {
        report.write(stage.path())?;
        fs::write(stage.join("predictions.csv"), csv)?;
        Ok(())
    })?;
    print!("{}", render_confusion(&report.confusion).to_text());
    println!("{}", report.summary());
    Ok(())
}

fn eval_confusion(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let rows = parse_confusion_rows(&text)?;
    let ccr = ccr_from_rows(&rows)?;
    for (k, c) in ccr.iter().enumerate() {
        println!("CCR {}: {c:.2}", hep2_core::data::class_name(k));
    }
    println!("MCA: {:.2}", mca(&ccr));
    Ok(())
}

pub fn report(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (rendered, m) = if path.extension().is_some_and(|e| e == "json") {
        let report = EvalReport::from_json(&text)?;
        (render_confusion(&report.confusion), report.mca)
    } else {
        let rows = parse_confusion_rows(&text)?;
        (render_rows(&rows), mca(&ccr_from_rows(&rows)?))
    };
    for w in &rendered.warnings {
        log::warn!("{w}");
    }
    print!("{}", rendered.to_text());
    println!("MCA: {m:.2}");
    Ok(())
}
