use std::collections::BTreeMap;

use super::EvalError;

fn check<L>(y: &[L], y_hat: &[L]) -> Result<(), EvalError> {
    if y.len() != y_hat.len() {
        return Err(EvalError::LengthMismatch { left: y.len(), right: y_hat.len() });
    }
    if y.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// Fraction of positions where `y_hat` equals `y`.
pub fn accuracy<L: PartialEq>(y: &[L], y_hat: &[L]) -> Result<f64, EvalError> {
    check(y, y_hat)?;
    let hits = y.iter().zip(y_hat).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y.len() as f64)
}

/// Accuracy with each correct prediction weighted by
/// `1 / (n_classes * count of its true class)`, where classes are the
/// distinct values of `y`. Equal to the mean per-class recall.
pub fn balanced_accuracy<L: Ord>(y: &[L], y_hat: &[L]) -> Result<f64, EvalError> {
    check(y, y_hat)?;
    let mut counts: BTreeMap<&L, usize> = BTreeMap::new();
    for label in y {
        *counts.entry(label).or_default() += 1;
    }
    let n_classes = counts.len() as f64;
    Ok(y.iter()
        .zip(y_hat)
        .filter(|(a, b)| a == b)
        .map(|(a, _)| 1.0 / (n_classes * counts[a] as f64))
        .sum::<f64>()
        .min(1.0))
}
