use ndarray::Array2;

use super::Real;
use crate::error::{Error, Result};

/// Lower bound on a probability inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Row-wise softmax with max subtraction.
pub fn softmax<T: Real>(logits: &Array2<T>) -> Array2<T> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: T = row.iter().copied().sum();
        row.mapv_inplace(|v| v / sum);
    }
    p
}

/// Mean negative log-likelihood of `targets` under `probs`, and its gradient
/// with respect to the logits that produced `probs` through a softmax.
pub fn cross_entropy<T: Real>(probs: &Array2<T>, targets: &[usize]) -> Result<(T, Array2<T>)> {
    let (batch, k) = probs.dim();
    if targets.len() != batch {
        return Err(Error::ShapeMismatch(format!(
            "{} targets for batch {batch}",
            targets.len()
        )));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= k) {
        return Err(Error::ShapeMismatch(format!(
            "target {t} out of range for {k} classes"
        )));
    }
    let n = T::of(batch as f64);
    let floor = T::of(PROB_FLOOR);
    let loss = targets
        .iter()
        .enumerate()
        .map(|(i, &t)| -probs[[i, t]].max(floor).ln())
        .sum::<T>()
        / n;
    let mut grad = probs / n;
    for (i, &t) in targets.iter().enumerate() {
        grad[[i, t]] -= T::one() / n;
    }
    Ok((loss, grad))
}
