//! Training loop, checkpoint ensembles and cross-validated experiments.

pub mod ensemble;
pub mod experiment;
pub mod trainer;

pub use ensemble::{average_scores, ensemble_predict, ensemble_predict_batch};
pub use experiment::{
    check_leakage, compose_fold, run_experiment, Composition, ExperimentOutcome, ExperimentSpec, FoldResult, Origin,
    TrainItem,
};
pub use trainer::{argmax, stack_cells, train, train_from, TrainConfig, TrainRun};
