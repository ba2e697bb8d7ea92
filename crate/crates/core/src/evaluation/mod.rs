//! Scoring of sampling designs: a Gaussian naive Bayes soil-class predictor
//! trained on the sampled pixels, plain and balanced accuracy, and the
//! multi-method benchmark harness.

mod benchmark;
mod metrics;
mod naive_bayes;

pub use benchmark::{
    percentile, run_benchmark, write_plot_csv, BenchmarkConfig, CellReport, EvaluationReport, Protocol, Summary,
};
pub use metrics::{accuracy, balanced_accuracy};
pub use naive_bayes::{nb_fit, nb_predict, NaiveBayesModel, DEFAULT_VAR_SMOOTHING};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::raster::RasterGrid;
use crate::samplers::SampleError;
use crate::terrain::FeatureMatrix;

/// Soil class label as stored in a class raster.
pub type Label = i64;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("LengthMismatch: {left} labels vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },
    #[error("Empty: no labels to score")]
    Empty,
    #[error("EmptyTraining: no training rows")]
    EmptyTraining,
    #[error("DimensionMismatch: model has {expected} features, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("class map is not aligned with the feature matrix grid")]
    Misaligned,
    #[error("no class label at grid cell ({row}, {col})")]
    MissingLabel { row: usize, col: usize },
    #[error("class label {0} is not an integer")]
    NonIntegerLabel(f64),
    #[error("class map has no labelled cells")]
    NoClasses,
    #[error("invalid benchmark protocol: {0}")]
    InvalidProtocol(String),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

/// Reference soil classes on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMap {
    grid: RasterGrid,
    classes: Vec<Label>,
}

impl ClassMap {
    /// Labels are the integral values of the valid cells.
    pub fn new(grid: RasterGrid) -> Result<Self, EvalError> {
        let mut classes = BTreeSet::new();
        for v in grid.values() {
            if *v == grid.nodata_value() {
                continue;
            }
            if v.fract() != 0.0 || v.abs() > 2f64.powi(53) {
                return Err(EvalError::NonIntegerLabel(*v));
            }
            classes.insert(*v as Label);
        }
        if classes.is_empty() {
            return Err(EvalError::NoClasses);
        }
        Ok(Self { grid, classes: classes.into_iter().collect() })
    }

    pub fn grid(&self) -> &RasterGrid {
        &self.grid
    }

    /// Distinct labels, ascending.
    pub fn classes(&self) -> &[Label] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn label(&self, row: usize, col: usize) -> Option<Label> {
        self.grid.get(row, col).map(|v| v as Label)
    }

    /// Pixel counts per class, in [`classes`](Self::classes) order.
    pub fn histogram(&self) -> Vec<(Label, usize)> {
        let mut counts = vec![0usize; self.classes.len()];
        for v in self.grid.values() {
            if *v != self.grid.nodata_value() {
                let i = self.classes.binary_search(&(*v as Label)).expect("label collected at construction");
                counts[i] += 1;
            }
        }
        self.classes.iter().copied().zip(counts).collect()
    }

    /// Label of every feature-matrix row.
    pub fn labels_for(&self, fm: &FeatureMatrix) -> Result<Vec<Label>, EvalError> {
        if self.grid.geometry() != fm.geometry() {
            return Err(EvalError::Misaligned);
        }
        fm.pixel_index()
            .iter()
            .map(|&(row, col)| self.label(row, col).ok_or(EvalError::MissingLabel { row, col }))
            .collect()
    }
}
