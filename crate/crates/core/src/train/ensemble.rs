//! Classification by averaging class scores over several checkpoints.

use crate::data::record::CellRecord;
use crate::error::{Error, Result};
use crate::nn::{predict_proba, NetworkConfig, Parameters};
use crate::train::trainer::{argmax, stack_cells};

/// Mean of the score vectors and its argmax (lowest index on ties).
///
/// Averaging is not a majority vote: one confident checkpoint can outweigh
/// two lukewarm ones.
pub fn average_scores(scores: &[Vec<f64>]) -> Result<(usize, Vec<f64>)> {
    let first = scores
        .first()
        .ok_or_else(|| Error::config("at least one checkpoint is required"))?;
    let k = first.len();
    if scores.iter().any(|s| s.len() != k) {
        return Err(Error::Internal("score vectors differ in length".into()));
    }
    let mut mean = vec![0.0; k];
    for s in scores {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    let n = scores.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    Ok((argmax(&mean), mean))
}

fn check_checkpoints(config: &NetworkConfig, checkpoints: &[Parameters<f32>]) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(Error::config("at least one checkpoint is required"));
    }
    if let Some(i) = checkpoints.iter().position(|p| !p.matches(config)) {
        return Err(Error::config(format!("checkpoint {i} does not match the network config")));
    }
    Ok(())
}

/// Predict many cells at once, batching the forward passes.
pub fn ensemble_predict_batch(
    config: &NetworkConfig,
    checkpoints: &[Parameters<f32>],
    cells: &[CellRecord],
    batch_size: usize,
) -> Result<Vec<(usize, Vec<f64>)>> {
    check_checkpoints(config, checkpoints)?;
    let k = config.num_classes;
    let mut out = Vec::with_capacity(cells.len());
    for chunk in cells.chunks(batch_size.max(1)) {
        let x = stack_cells(chunk, config.input_shape)?;
        let mut per_checkpoint = Vec::with_capacity(checkpoints.len());
        for params in checkpoints {
            per_checkpoint.push(predict_proba(config, params, &x)?);
        }
        for i in 0..chunk.len() {
            let scores: Vec<Vec<f64>> = per_checkpoint
                .iter()
                .map(|p| p.as_slice()[i * k..(i + 1) * k].iter().map(|&v| f64::from(v)).collect())
                .collect();
            out.push(average_scores(&scores)?);
        }
    }
    Ok(out)
}

/// Class id and averaged score vector for one cell.
pub fn ensemble_predict(
    config: &NetworkConfig,
    checkpoints: &[Parameters<f32>],
    cell: &CellRecord,
) -> Result<(usize, Vec<f64>)> {
    Ok(ensemble_predict_batch(config, checkpoints, std::slice::from_ref(cell), 1)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averaged_rule() {
        let (c, mean) = average_scores(&[vec![0.6, 0.4], vec![0.2, 0.8], vec![0.2, 0.8]]).unwrap();
        assert_eq!(c, 1);
        assert!((mean[0] - 1.0 / 3.0).abs() < 1e-12 && (mean[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn average_beats_majority() {
        let (c, mean) = average_scores(&[vec![0.9, 0.1], vec![0.45, 0.55], vec![0.45, 0.55]]).unwrap();
        assert_eq!(c, 0);
        assert!((mean[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn no_checkpoints() {
        assert!(average_scores(&[]).is_err());
    }
}
