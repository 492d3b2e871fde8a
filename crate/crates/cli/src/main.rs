//! `hep2`: command-line entry point for the cell classification toolkit.

mod commands;
mod experiment;
mod staging;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "hep2", version, about = "HEp-2 cell extraction, augmentation, CNN training and cross-specimen evaluation")]
struct Cli {
    /// Log filter, e.g. `info` or `hep2_core=debug`.
    #[arg(long, global = true, default_value = "info", env = "HEP2_LOG")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

/// Output directory shared by every artifact-producing command.
#[derive(Debug, Clone, Args)]
pub struct OutArg {
    /// Directory for all outputs; defaults to `$HEP2_OUT`.
    #[arg(long, env = "HEP2_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeKind {
    Loso,
    Kfold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Batch 200, 50 epochs, learning rate 0.002, checkpoints at 48-50.
    Full,
    /// Batch 20, 10 epochs, learning rate 0.05, larger initial weights.
    Desk,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Crop one cell per mask component from `<specimens>/<Label>/<id>.png`.
    Extract {
        #[arg(long)]
        specimens: PathBuf,
        /// Masks at the same relative paths as the specimens.
        #[arg(long)]
        masks: PathBuf,
        #[arg(long = "box", default_value_t = hep2_core::data::CELL_BOX)]
        box_side: usize,
        /// Mask pixels above this unit-range intensity are foreground.
        #[arg(long, default_value_t = 0.5)]
        threshold: f32,
        #[command(flatten)]
        out: OutArg,
    },
    /// Write the rotated and mirrored variants of every record.
    Augment {
        #[arg(long)]
        manifest: PathBuf,
        /// `x8`, `task2`, `none`, a per-class list such as `2,2,2,2,4,8`, or `Golgi=x8,...`.
        #[arg(long, default_value = "x8")]
        policy: String,
        #[command(flatten)]
        out: OutArg,
    },
    /// Generate a synthetic specimen dataset.
    Synth {
        #[arg(long, default_value_t = 8)]
        specimens_per_class: usize,
        #[arg(long, default_value_t = 40)]
        cells_per_specimen: usize,
        #[arg(long, default_value_t = 6)]
        classes: usize,
        /// Weight of the shared per-specimen style, in [0, 1].
        #[arg(long, default_value_t = 0.8)]
        correlation: f64,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Plan leave-one-specimen-out or k-fold splits.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        scheme: SchemeKind,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Train a network and save checkpoints.
    Train(commands::TrainArgs),
    /// Evaluate checkpoints, or compute the MCA of a given confusion matrix.
    Eval(commands::EvalArgs),
    /// Render a confusion matrix as row percentages.
    Report {
        /// Counts or percentages, one row per true class; or a `report.json`.
        #[arg(long)]
        confusion: PathBuf,
    },
    /// Run a cross-validated experiment described by a TOML file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output directory named in the file.
        #[arg(long, env = "HEP2_OUT")]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Extract {
            specimens,
            masks,
            box_side,
            threshold,
            out,
        } => commands::extract(&specimens, &masks, box_side, threshold, &out.out),
        Command::Augment { manifest, policy, out } => commands::augment(&manifest, &policy, &out.out),
        Command::Synth {
            specimens_per_class,
            cells_per_specimen,
            classes,
            correlation,
            noise,
            seed,
            out,
        } => {
            let spec = hep2_core::synth::SynthSpec {
                num_specimens_per_class: specimens_per_class,
                cells_per_specimen,
                classes,
                intra_specimen_correlation: correlation,
                noise_std: noise,
                seed,
            };
            commands::synth(&spec, &out.out)
        }
        Command::Split {
            manifest,
            scheme,
            k,
            seed,
            out,
        } => {
            let scheme = match scheme {
                SchemeKind::Loso => hep2_core::eval::SplitScheme::Loso,
                SchemeKind::Kfold => hep2_core::eval::SplitScheme::KFold { k, seed },
            };
            commands::split(&manifest, scheme, &out.out)
        }
        Command::Train(args) => commands::train(&args),
        Command::Eval(args) => commands::eval(&args),
        Command::Report { confusion } => commands::report(&confusion),
        Command::Experiment { config, out, jobs } => experiment::run(&config, out, jobs),
    }
}

/// 2 for broken internal invariants, 1 for everything the user can fix.
fn exit_code(err: &anyhow::Error) -> u8 {
    let internal = err
        .chain()
        .any(|e| e.downcast_ref::<hep2_core::Error>().is_some_and(hep2_core::Error::is_internal));
    if internal {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_target(false)
        .init();
    log::info!("command: {:?}", cli.command);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
