//! Binary cross entropy over probability predictions.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Negative log likelihood of each binary label under its predicted
/// probability.
///
/// Predictions are clamped to `[1e-12, 1 - 1e-12]` before the log so an
/// exactly saturated sigmoid cannot produce infinities.
pub fn bce_per_sample<T: Scalar>(predictions: &[T], labels: &[T]) -> Result<Vec<T>> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput("bce over an empty batch".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} predictions against {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let floor = T::from(1e-12).unwrap();
    let ceil = T::one() - floor;
    Ok(predictions
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.max(floor).min(ceil);
            -(y * p.ln() + (T::one() - y) * (T::one() - p).ln())
        })
        .collect())
}

/// Mean of [`bce_per_sample`] plus the gradient with respect to each
/// prediction, evaluated at the clamped value.
pub fn bce_loss<T: Scalar>(predictions: &[T], labels: &[T]) -> Result<(T, Vec<T>)> {
    let per_sample = bce_per_sample(predictions, labels)?;
    let floor = T::from(1e-12).unwrap();
    let ceil = T::one() - floor;
    let n = T::from(predictions.len()).unwrap();
    let mut total = T::zero();
    let mut grad = Vec::with_capacity(predictions.len());
    for ((&p, &y), &l) in predictions.iter().zip(labels).zip(&per_sample) {
        let p = p.max(floor).min(ceil);
        total += l;
        grad.push(-(y / p - (T::one() - y) / (T::one() - p)) / n);
    }
    Ok((total / n, grad))
}
