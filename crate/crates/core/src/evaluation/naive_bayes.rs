use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{EvalError, Label};

/// Relative variance smoothing: this fraction of the largest per-feature
/// training variance is added to every class variance.
pub const DEFAULT_VAR_SMOOTHING: f64 = 1e-9;

/// Smallest smoothing term, used when every training feature is constant.
const MIN_FLOOR: f64 = 1e-12;

/// Gaussian naive Bayes with per-class diagonal variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    /// Ascending; ties in prediction go to the earlier class.
    pub classes: Vec<Label>,
    pub priors: Vec<f64>,
    /// `means[c][j]` for class `c`, feature `j`.
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    /// Term added to every variance.
    pub var_floor: f64,
}

impl NaiveBayesModel {
    pub fn n_features(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Unnormalized log posterior of each class for one feature vector.
    pub fn joint_log_likelihood(&self, x: &[f64]) -> Vec<f64> {
        (0..self.classes.len())
            .map(|c| {
                let ll: f64 = x
                    .iter()
                    .zip(&self.means[c])
                    .zip(&self.variances[c])
                    .map(|((v, mu), var)| -0.5 * (2.0 * PI * var).ln() - (v - mu).powi(2) / (2.0 * var))
                    .sum();
                self.priors[c].ln() + ll
            })
            .collect()
    }

    /// Class of the largest score, first class on ties.
    pub fn argmax(&self, scores: &[f64]) -> Label {
        let mut best = 0;
        for (c, s) in scores.iter().enumerate().skip(1) {
            if *s > scores[best] {
                best = c;
            }
        }
        self.classes[best]
    }
}

/// Fits class priors (training frequencies), means and population variances.
pub fn nb_fit(x: &DMatrix<f64>, labels: &[Label], var_smoothing: f64) -> Result<NaiveBayesModel, EvalError> {
    let (m, n) = x.shape();
    if labels.len() != m {
        return Err(EvalError::LengthMismatch { left: labels.len(), right: m });
    }
    if m == 0 {
        return Err(EvalError::EmptyTraining);
    }
    let population_var = |rows: &[usize], j: usize| {
        let mean = rows.iter().map(|&i| x[(i, j)]).sum::<f64>() / rows.len() as f64;
        let var = rows.iter().map(|&i| (x[(i, j)] - mean).powi(2)).sum::<f64>() / rows.len() as f64;
        (mean, var)
    };
    let all: Vec<usize> = (0..m).collect();
    let max_var = (0..n).map(|j| population_var(&all, j).1).fold(0.0, f64::max);
    let var_floor = (var_smoothing * max_var).max(MIN_FLOOR);

    let mut by_class: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut model = NaiveBayesModel { classes: vec![], priors: vec![], means: vec![], variances: vec![], var_floor };
    for (label, rows) in by_class {
        let (means, vars): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|j| {
                let (mu, var) = population_var(&rows, j);
                (mu, var + var_floor)
            })
            .unzip();
        model.classes.push(label);
        model.priors.push(rows.len() as f64 / m as f64);
        model.means.push(means);
        model.variances.push(vars);
    }
    Ok(model)
}

/// Most probable class of every row of `x`.
pub fn nb_predict(model: &NaiveBayesModel, x: &DMatrix<f64>) -> Result<Vec<Label>, EvalError> {
    if x.ncols() != model.n_features() {
        return Err(EvalError::DimensionMismatch { expected: model.n_features(), found: x.ncols() });
    }
    let mut row = vec![0.0; x.ncols()];
    Ok((0..x.nrows())
        .map(|i| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = x[(i, j)];
            }
            model.argmax(&model.joint_log_likelihood(&row))
        })
        .collect())
}
