use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probability clipping bound applied before taking logarithms.
pub const BCE_EPSILON: f64 = 1e-7;

/// Mean binary cross-entropy over every `(sample, label)` entry.
///
/// `probs` and `labels` are row-major with identical layout.
pub fn bce_loss<T: Scalar>(probs: &[T], labels: &[u8]) -> Result<f64> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::shape(format!(
            "bce: {} probabilities vs {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.as_f64().clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / probs.len() as f64)
}

/// Gradient of the mean BCE w.r.t. the logits feeding a sigmoid:
/// `(p − y) / N` where `N` is the number of entries in the whole batch.
pub fn bce_sigmoid_grad<T: Scalar>(probs: &[T], labels: &[u8], n_entries: usize) -> Result<Vec<T>> {
    if probs.len() != labels.len() || n_entries == 0 {
        return Err(Error::shape(format!(
            "bce grad: {} probabilities vs {} labels over {n_entries} entries",
            probs.len(),
            labels.len()
        )));
    }
    let scale = T::one() / T::from_usize(n_entries).expect("entry count fits the scalar");
    Ok(probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| (p - if y == 1 { T::one() } else { T::zero() }) * scale)
        .collect())
}
