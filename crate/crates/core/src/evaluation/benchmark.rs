use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{accuracy, balanced_accuracy, nb_fit, nb_predict, ClassMap, EvalError, Label, DEFAULT_VAR_SMOOTHING};
use crate::samplers::{kennard_stone_order, sample, ClhsOptions, Method, RngSeed, SampleError};
use crate::terrain::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub methods: Vec<Method>,
    /// Designs per cell for randomized methods; deterministic ones run once.
    pub repetitions: usize,
    pub clhs: ClhsOptions,
    pub epsilon: f64,
    pub seed: RngSeed,
    /// Train and predict on the terrain columns only.
    pub drop_coords: bool,
    pub var_smoothing: f64,
    /// Leave `time_s` empty so reports are byte-reproducible.
    pub record_timings: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            k_min: 7,
            k_max: 27,
            methods: Method::ALL.to_vec(),
            repetitions: 1000,
            clhs: ClhsOptions::default(),
            epsilon: 0.0,
            seed: RngSeed(42),
            drop_coords: false,
            var_smoothing: DEFAULT_VAR_SMOOTHING,
            record_timings: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub k_min: usize,
    pub k_max: usize,
    pub methods: Vec<Method>,
    pub repetitions: usize,
    pub clhs_iterations: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub drop_coords: bool,
    pub var_smoothing: f64,
    pub n_rows: usize,
    pub features: Vec<String>,
    pub classes: Vec<Label>,
}

/// Dispersion of one metric over the runs of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub p5: f64,
    pub p95: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            median: percentile(&sorted, 50.0),
            p5: percentile(&sorted, 5.0),
            p95: percentile(&sorted, 95.0),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        })
    }
}

/// Linear-interpolation percentile of ascending `sorted` values, `q` in [0, 100].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=100.0).contains(&q));
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub method: Method,
    pub k: usize,
    pub runs: usize,
    pub accuracy: Option<Summary>,
    pub balanced_accuracy: Option<Summary>,
    /// Mean wall-clock seconds to produce one design. Kennard–Stone designs
    /// are nested, so every k reports the time of the single `k_max` run.
    pub time_s: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub protocol: Protocol,
    /// Method-major, k ascending.
    pub cells: Vec<CellReport>,
}

impl EvaluationReport {
    pub fn cell(&self, method: Method, k: usize) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.method == method && c.k == k)
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }
}

struct Scorer<'a> {
    predictors: DMatrix<f64>,
    labels: &'a [Label],
    var_smoothing: f64,
}

impl Scorer<'_> {
    fn score(&self, rows: &[usize]) -> Result<(f64, f64), EvalError> {
        let train = self.predictors.select_rows(rows);
        let train_labels: Vec<Label> = rows.iter().map(|&i| self.labels[i]).collect();
        let model = nb_fit(&train, &train_labels, self.var_smoothing)?;
        let pred = nb_predict(&model, &self.predictors)?;
        Ok((accuracy(self.labels, &pred)?, balanced_accuracy(self.labels, &pred)?))
    }
}

type Run = Result<(f64, f64, f64), EvalError>;

/// Scores every method at every k: designs are drawn from `fm`, a naive
/// Bayes model is trained on the sampled pixels' reference labels and
/// predicts every row of `fm`. A failing cell records its error and the
/// others continue.
///
/// Repetition `r` of method `m` at `k` uses `seed.derive(m).derive(k).derive(r)`,
/// so the report does not depend on thread count or scheduling.
pub fn run_benchmark(
    fm: &FeatureMatrix,
    reference: &ClassMap,
    cfg: &BenchmarkConfig,
) -> Result<EvaluationReport, EvalError> {
    if cfg.k_min == 0 || cfg.k_min > cfg.k_max {
        return Err(EvalError::InvalidProtocol(format!("k range {}:{} is empty", cfg.k_min, cfg.k_max)));
    }
    if cfg.repetitions == 0 {
        return Err(EvalError::InvalidProtocol("repetitions must be >= 1".into()));
    }
    if cfg.methods.is_empty() {
        return Err(EvalError::InvalidProtocol("no methods selected".into()));
    }
    let labels = reference.labels_for(fm)?;
    let scorer =
        Scorer { predictors: fm.predictors(cfg.drop_coords), labels: &labels, var_smoothing: cfg.var_smoothing };

    let mut ks_cache: Option<(Vec<usize>, f64)> = None;
    let mut cells = Vec::new();
    for &method in &cfg.methods {
        let method_seed = cfg.seed.derive(Method::ALL.iter().position(|&m| m == method).unwrap() as u64);
        for k in cfg.k_min..=cfg.k_max {
            let runs: Vec<Run> = if method == Method::KennardStone {
                vec![ks_run(fm, k, cfg.k_max, &mut ks_cache, &scorer)]
            } else {
                let reps = if method.is_randomized() { cfg.repetitions } else { 1 };
                let cell_seed = method_seed.derive(k as u64);
                (0..reps)
                    .into_par_iter()
                    .map(|r| {
                        let start = Instant::now();
                        let design = sample(fm, method, k, cfg.epsilon, cell_seed.derive(r as u64), &cfg.clhs)?;
                        let elapsed = start.elapsed().as_secs_f64();
                        let (a, b) = scorer.score(&design.rows())?;
                        Ok((a, b, elapsed))
                    })
                    .collect()
            };
            cells.push(summarize(method, k, runs, cfg.record_timings));
        }
    }

    Ok(EvaluationReport {
        protocol: Protocol {
            k_min: cfg.k_min,
            k_max: cfg.k_max,
            methods: cfg.methods.clone(),
            repetitions: cfg.repetitions,
            clhs_iterations: cfg.clhs.iterations,
            epsilon: cfg.epsilon,
            seed: cfg.seed.0,
            drop_coords: cfg.drop_coords,
            var_smoothing: cfg.var_smoothing,
            n_rows: fm.nrows(),
            features: fm.feature_names()[..scorer.predictors.ncols()].to_vec(),
            classes: reference.classes().to_vec(),
        },
        cells,
    })
}

fn ks_run(fm: &FeatureMatrix, k: usize, k_max: usize, cache: &mut Option<(Vec<usize>, f64)>, scorer: &Scorer) -> Run {
    let (lo, hi) = (2, fm.nrows());
    if k < lo || k > hi {
        return Err(SampleError::InvalidK { k, min: lo, max: hi }.into());
    }
    if cache.is_none() {
        let start = Instant::now();
        let order = kennard_stone_order(fm.matrix().as_matrix(), k_max.min(hi));
        *cache = Some((order, start.elapsed().as_secs_f64()));
    }
    let (order, elapsed) = cache.as_ref().unwrap();
    let (a, b) = scorer.score(&order[..k])?;
    Ok((a, b, *elapsed))
}

fn summarize(method: Method, k: usize, runs: Vec<Run>, record_timings: bool) -> CellReport {
    let n = runs.len();
    let mut cell =
        CellReport { method, k, runs: n, accuracy: None, balanced_accuracy: None, time_s: None, error: None };
    match runs.into_iter().collect::<Result<Vec<_>, _>>() {
        Ok(ok) => {
            let acc: Vec<f64> = ok.iter().map(|r| r.0).collect();
            let bal: Vec<f64> = ok.iter().map(|r| r.1).collect();
            cell.accuracy = Summary::of(&acc);
            cell.balanced_accuracy = Summary::of(&bal);
            if record_timings {
                cell.time_s = Some(ok.iter().map(|r| r.2).sum::<f64>() / n as f64);
            }
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

/// One line per (method, k, metric) with the mean and the percentile band.
pub fn write_plot_csv<W: Write>(report: &EvaluationReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "k", "metric", "mean", "median", "p5", "p95"])?;
    for cell in &report.cells {
        for (metric, summary) in [("accuracy", &cell.accuracy), ("balanced_accuracy", &cell.balanced_accuracy)] {
            if let Some(s) = summary {
                w.write_record([
                    cell.method.tag().to_string(),
                    cell.k.to_string(),
                    metric.to_string(),
                    s.mean.to_string(),
                    s.median.to_string(),
                    s.p5.to_string(),
                    s.p95.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
