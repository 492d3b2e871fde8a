//! Minibatch SGD with fixed hyperparameters and late-epoch checkpoints.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::record::CellRecord;
use crate::error::{Error, Result};
use crate::nn::{init_params_with_std, network_backward, network_forward, NetworkConfig, Parameters};
use crate::nn::params::INIT_STD;
use crate::tensor::Tensor4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f32,
    pub seed: u64,
    /// Standard deviation of the uniform weight initialization.
    pub init_std: f64,
    pub checkpoint_epochs: BTreeSet<usize>,
    /// Wall-clock limit per training run; exceeding it stops the run early.
    pub time_budget_secs: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 200,
            epochs: 50,
            learning_rate: 0.002,
            seed: 0,
            init_std: INIT_STD,
            checkpoint_epochs: [48, 49, 50].into_iter().collect(),
            time_budget_secs: None,
        }
    }
}

impl TrainConfig {
    /// Keep the defaults but train for `epochs`, checkpointing the last three
    /// (or fewer) epochs.
    pub fn with_epochs(epochs: usize) -> Self {
        TrainConfig {
            epochs,
            checkpoint_epochs: (epochs.saturating_sub(2).max(1)..=epochs).collect(),
            ..TrainConfig::default()
        }
    }

    /// Settings for small synthetic studies that must converge in about ten
    /// epochs: smaller batches, a larger step and larger initial weights.
    pub fn desk_scale() -> Self {
        TrainConfig {
            batch_size: 20,
            learning_rate: 0.05,
            init_std: 0.2,
            ..TrainConfig::with_epochs(10)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::config("learning_rate must be finite and nonnegative"));
        }
        if !self.init_std.is_finite() || self.init_std < 0.0 {
            return Err(Error::config("init_std must be finite and nonnegative"));
        }
        if self.checkpoint_epochs.is_empty() {
            return Err(Error::config("at least one checkpoint epoch is required"));
        }
        if let Some(&e) = self.checkpoint_epochs.iter().find(|&&e| e == 0 || e > self.epochs) {
            return Err(Error::config(format!(
                "checkpoint epoch {e} outside [1, {}]",
                self.epochs
            )));
        }
        Ok(())
    }
}

/// History and checkpoints of one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainRun {
    /// Mean minibatch loss per completed epoch.
    pub epoch_loss: Vec<f64>,
    /// Training accuracy (percent) per completed epoch, measured before each update.
    pub epoch_accuracy: Vec<f64>,
    pub checkpoints: Vec<(usize, Parameters<f32>)>,
    /// False when the time budget stopped training early.
    pub completed: bool,
}

impl TrainRun {
    pub fn checkpoint_params(&self) -> Vec<Parameters<f32>> {
        self.checkpoints.iter().map(|(_, p)| p.clone()).collect()
    }
}

/// Stack cell images into a `(n, 1, side, side)` batch.
pub fn stack_cells<'a>(cells: impl IntoIterator<Item = &'a CellRecord>, input_shape: [usize; 3]) -> Result<Tensor4<f32>> {
    let [c, h, w] = input_shape;
    if c != 1 {
        return Err(Error::config(format!("grayscale cells need 1 input channel, network has {c}")));
    }
    let mut data = Vec::new();
    let mut n = 0;
    for (i, cell) in cells.into_iter().enumerate() {
        if cell.pixels.width() != w || cell.pixels.height() != h {
            return Err(Error::Record {
                index: i,
                message: format!(
                    "cell is {}x{}, network input is {w}x{h}",
                    cell.pixels.width(),
                    cell.pixels.height()
                ),
            });
        }
        data.extend_from_slice(cell.pixels.pixels());
        n += 1;
    }
    Tensor4::from_vec([n, 1, h, w], data)
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(epoch as u64));
    rng.set_stream(1);
    rng
}

/// Train from a fresh seeded initialization.
pub fn train(config: &NetworkConfig, tcfg: &TrainConfig, trainset: &[CellRecord]) -> Result<TrainRun> {
    let params = init_params_with_std(config, tcfg.seed, tcfg.init_std)?;
    train_from(config, tcfg, trainset, params)
}

/// Train starting from `params`.
///
/// Each epoch visits the records in a fresh permutation seeded from
/// `tcfg.seed + epoch`, in minibatches of `batch_size` (the last one may be
/// short), applying one SGD step per minibatch.
pub fn train_from(
    config: &NetworkConfig,
    tcfg: &TrainConfig,
    trainset: &[CellRecord],
    mut params: Parameters<f32>,
) -> Result<TrainRun> {
    config.validate()?;
    tcfg.validate()?;
    if trainset.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    if !params.matches(config) {
        return Err(Error::config("initial parameters do not match the network config"));
    }
    if let Some((index, r)) = trainset.iter().enumerate().find(|(_, r)| r.label >= config.num_classes) {
        return Err(Error::Record {
            index,
            message: format!("label {} outside [0, {})", r.label, config.num_classes),
        });
    }
    let data = stack_cells(trainset, config.input_shape)?;
    let item = data.item_len();
    let [_, c, h, w] = data.dims();
    let budget = tcfg.time_budget_secs.map(Duration::from_secs_f64);
    let started = Instant::now();

    let mut run = TrainRun {
        epoch_loss: Vec::with_capacity(tcfg.epochs),
        epoch_accuracy: Vec::with_capacity(tcfg.epochs),
        checkpoints: Vec::new(),
        completed: true,
    };
    let mut order: Vec<usize> = (0..trainset.len()).collect();
    'epochs: for epoch in 1..=tcfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut epoch_rng(tcfg.seed, epoch));
        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        for batch in order.chunks(tcfg.batch_size) {
            let mut values = Vec::with_capacity(batch.len() * item);
            for &i in batch {
                values.extend_from_slice(data.item(i));
            }
            let x = Tensor4::from_vec([batch.len(), c, h, w], values)?;
            let labels: Vec<usize> = batch.iter().map(|&i| trainset[i].label).collect();
            let (probs, cache) = network_forward(config, &params, &x)?;
            let (loss, grads) = network_backward(config, &params, &cache, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Internal(format!("non-finite loss in epoch {epoch}")));
            }
            correct += probs
                .as_slice()
                .chunks_exact(config.num_classes)
                .zip(&labels)
                .filter(|(row, &l)| argmax(row) == l)
                .count();
            loss_sum += f64::from(loss) * batch.len() as f64;
            params.apply_sgd(&grads, tcfg.learning_rate)?;
            if budget.is_some_and(|b| started.elapsed() > b) {
                run.completed = false;
                break 'epochs;
            }
        }
        run.epoch_loss.push(loss_sum / trainset.len() as f64);
        run.epoch_accuracy.push(100.0 * correct as f64 / trainset.len() as f64);
        log::debug!(
            "epoch {epoch}: loss {:.5} accuracy {:.2}",
            run.epoch_loss[epoch - 1],
            run.epoch_accuracy[epoch - 1]
        );
        if tcfg.checkpoint_epochs.contains(&epoch) {
            run.checkpoints.push((epoch, params.clone()));
        }
    }
    Ok(run)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let t = TrainConfig::default();
        assert_eq!((t.batch_size, t.epochs, t.learning_rate), (200, 50, 0.002));
        assert_eq!(t.checkpoint_epochs.iter().copied().collect::<Vec<_>>(), vec![48, 49, 50]);
        t.validate().unwrap();
        assert_eq!(
            TrainConfig::with_epochs(10).checkpoint_epochs.into_iter().collect::<Vec<_>>(),
            vec![8, 9, 10]
        );
        assert_eq!(
            TrainConfig::with_epochs(1).checkpoint_epochs.into_iter().collect::<Vec<_>>(),
            vec![1]
        );
    }

    #[test]
    fn invalid_configs() {
        let mut t = TrainConfig::default();
        t.batch_size = 0;
        assert!(t.validate().is_err());
        let mut t = TrainConfig::default();
        t.checkpoint_epochs.insert(51);
        assert!(t.validate().is_err());
    }

    #[test]
    fn argmax_ties_to_lowest() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn empty_trainset_rejected() {
        let cfg = NetworkConfig::compact(2);
        assert!(train(&cfg, &TrainConfig::with_epochs(1), &[]).is_err());
    }
}
