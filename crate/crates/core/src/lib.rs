//! Soil sampling design on gridded terrain: maximum-volume row selection,
//! terrain feature extraction, competing samplers and their evaluation.

pub mod evaluation;
pub mod formats;
pub mod maxvol;
pub mod raster;
pub mod samplers;
pub mod synth;
pub mod terrain;

pub use evaluation::{ClassMap, EvaluationReport, Label};
pub use maxvol::{maxvol_rect, maxvol_square, MaxvolError, MaxvolOptions, MaxvolResult, TallMatrix};
pub use raster::{GridGeometry, RasterError, RasterGrid};
pub use samplers::{Method, RngSeed, SampleDesign, SampleError};
pub use synth::{generate_site, SiteSpec};
pub use terrain::{features_from_dem, FeatureMatrix, TerrainError};
