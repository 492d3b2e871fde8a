//! Softmax with mean cross-entropy over a batch.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

/// Row-wise softmax of `logits` (one row of `K` scores per batch item).
pub fn softmax<T: Scalar>(logits: &Tensor4<T>) -> Tensor4<T> {
    let k = logits.item_len();
    let mut probs = logits.clone();
    for row in probs.as_mut_slice().chunks_exact_mut(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total = total + *v;
        }
        for v in row.iter_mut() {
            *v = *v / total;
        }
    }
    probs
}

fn check_labels(labels: &[usize], n: usize, k: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::Data(format!("{} labels for a batch of {n}", labels.len())));
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
        return Err(Error::Record {
            index,
            message: format!("label {label} outside [0, {k})"),
        });
    }
    Ok(())
}

/// Mean negative log-likelihood of `labels` under softmax(`logits`), plus the probabilities.
pub fn softmax_xent_forward<T: Scalar>(logits: &Tensor4<T>, labels: &[usize]) -> Result<(T, Tensor4<T>)> {
    let (n, k) = (logits.batch(), logits.item_len());
    check_labels(labels, n, k)?;
    let mut loss = T::zero();
    for (row, &label) in logits.as_slice().chunks_exact(k).zip(labels) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let log_total = row.iter().fold(T::zero(), |acc, &v| acc + (v - max).exp()).ln();
        loss = loss + (log_total - (row[label] - max));
    }
    let loss = if n == 0 { T::zero() } else { loss / T::from_usize(n).unwrap() };
    Ok((loss, softmax(logits)))
}

/// Gradient of the mean loss with respect to the logits: `(probs - onehot) / n`.
pub fn softmax_xent_backward<T: Scalar>(probs: &Tensor4<T>, labels: &[usize]) -> Result<Tensor4<T>> {
    let (n, k) = (probs.batch(), probs.item_len());
    check_labels(labels, n, k)?;
    let scale = T::one() / T::from_usize(n.max(1)).unwrap();
    let mut grad = probs.clone();
    for (row, &label) in grad.as_mut_slice().chunks_exact_mut(k).zip(labels) {
        row[label] = row[label] - T::one();
        for v in row.iter_mut() {
            *v = *v * scale;
        }
    }
    Ok(grad)
}
