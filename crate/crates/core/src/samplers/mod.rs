//! Sampling designs over a [`FeatureMatrix`]: maxvol with a minimum-distance
//! constraint, simple random sampling, Kennard–Stone and conditioned Latin
//! hypercube sampling.

mod clhs;
mod kennard_stone;
mod maxvol;
mod random;

pub use clhs::{clhs_objective, clhs_select, sample_clhs, ClhsOptions, ClhsOutcome, Strata};
pub use kennard_stone::{kennard_stone_order, sample_kennard_stone};
pub use maxvol::{sample_maxvol, sample_maxvol_with, spacing_veto};
pub use random::sample_random;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maxvol::MaxvolError;
use crate::terrain::FeatureMatrix;

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("k = {k} outside [{min}, {max}] for this method")]
    InvalidK { k: usize, min: usize, max: usize },
    #[error("epsilon must be finite and >= 0, got {0}")]
    InvalidEpsilon(f64),
    #[error("InsufficientPoints: distance constraint left only {achieved} of {requested} points")]
    InsufficientPoints { achieved: usize, requested: usize },
    #[error("iterations must be >= 1")]
    NoIterations,
    #[error(transparent)]
    Maxvol(MaxvolError),
}

impl From<MaxvolError> for SampleError {
    fn from(e: MaxvolError) -> Self {
        match e {
            MaxvolError::InsufficientPoints { selected, requested } => {
                SampleError::InsufficientPoints { achieved: selected, requested }
            }
            other => SampleError::Maxvol(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Maxvol,
    Random,
    #[serde(rename = "ks")]
    KennardStone,
    Clhs,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Maxvol, Method::Random, Method::KennardStone, Method::Clhs];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Maxvol => "maxvol",
            Method::Random => "random",
            Method::KennardStone => "ks",
            Method::Clhs => "clhs",
        }
    }

    /// Whether repeated runs differ (and therefore take a seed).
    pub fn is_randomized(self) -> bool {
        matches!(self, Method::Random | Method::Clhs)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "maxvol" => Ok(Method::Maxvol),
            "random" => Ok(Method::Random),
            "ks" | "kennard-stone" | "kennard_stone" => Ok(Method::KennardStone),
            "clhs" => Ok(Method::Clhs),
            other => Err(format!("unknown method `{other}` (expected maxvol, random, ks or clhs)")),
        }
    }
}

/// Seed for the randomized samplers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent child seed; a fixed SplitMix64-style mix of the parent and
    /// `stream`, so results never depend on evaluation order.
    pub fn derive(self, stream: u64) -> RngSeed {
        let mut z = self.0 ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub matrix_row: usize,
    pub grid_row: usize,
    pub grid_col: usize,
    pub world_x: f64,
    pub world_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDesign {
    /// Points in selection order.
    pub points: Vec<SamplePoint>,
    /// Minimum spacing in normalized coordinate units (0 = unconstrained).
    pub epsilon: f64,
    pub method: Method,
    pub seed: Option<u64>,
}

impl SampleDesign {
    pub fn from_rows(fm: &FeatureMatrix, rows: &[usize], method: Method, epsilon: f64, seed: Option<RngSeed>) -> Self {
        let points = rows
            .iter()
            .map(|&i| {
                let (grid_row, grid_col) = fm.pixel_index()[i];
                let (world_x, world_y) = fm.world(i);
                SamplePoint { matrix_row: i, grid_row, grid_col, world_x, world_y }
            })
            .collect();
        Self { points, epsilon, method, seed: seed.map(|s| s.0) }
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub fn rows(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.matrix_row).collect()
    }

    /// Smallest pairwise squared distance in normalized coordinates.
    pub fn min_sq_spacing(&self, fm: &FeatureMatrix) -> Option<f64> {
        let coords: Vec<(f64, f64)> = self.points.iter().map(|p| fm.coords(p.matrix_row)).collect();
        let mut best: Option<f64> = None;
        for (i, a) in coords.iter().enumerate() {
            for b in &coords[i + 1..] {
                let d = (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2);
                best = Some(best.map_or(d, |x: f64| x.min(d)));
            }
        }
        best
    }

    /// Smallest pairwise ground distance between point centers.
    pub fn min_ground_spacing(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                let d = (a.world_x - b.world_x).hypot(a.world_y - b.world_y);
                best = Some(best.map_or(d, |x: f64| x.min(d)));
            }
        }
        best
    }

    /// Distinct rows and, when `epsilon > 0`, every pair at least `epsilon` apart.
    pub fn is_valid(&self, fm: &FeatureMatrix) -> bool {
        let mut rows = self.rows();
        rows.sort_unstable();
        let distinct = rows.windows(2).all(|w| w[0] != w[1]) && rows.last().is_none_or(|&r| r < fm.nrows());
        let spaced = self.epsilon <= 0.0 || self.min_sq_spacing(fm).is_none_or(|d| d >= self.epsilon * self.epsilon);
        distinct && spaced
    }
}

/// Runs one sampler with the parameters relevant to it.
pub fn sample(
    fm: &FeatureMatrix,
    method: Method,
    k: usize,
    epsilon: f64,
    seed: RngSeed,
    clhs: &ClhsOptions,
) -> Result<SampleDesign, SampleError> {
    match method {
        Method::Maxvol => sample_maxvol(fm, k, epsilon),
        Method::Random => sample_random(fm, k, seed),
        Method::KennardStone => sample_kennard_stone(fm, k),
        Method::Clhs => sample_clhs(fm, k, clhs, seed),
    }
}

fn check_k(k: usize, min: usize, max: usize) -> Result<(), SampleError> {
    if k < min || k > max {
        Err(SampleError::InvalidK { k, min, max })
    } else {
        Ok(())
    }
}
