//! Morphometric layers derived from a DEM and the feature matrix built from
//! them.

mod features;
mod hydrology;
mod morphometry;

pub use features::{build_feature_matrix, FeatureMatrix, NormRecord};
pub use hydrology::{d8_receivers, fill_depressions, flow_accumulation, Filled};
pub use morphometry::{slope_aspect, twi, SlopeAspect, DEFAULT_MIN_TAN_SLOPE};

use thiserror::Error;

use crate::maxvol::MaxvolError;
use crate::raster::RasterGrid;

#[derive(Debug, Error)]
pub enum TerrainError {
    #[error("TooSmall: DEM must be at least 3x3, got {nrows}x{ncols}")]
    TooSmall { nrows: usize, ncols: usize },
    #[error("CycleDetected: {unresolved} cells never drained")]
    CycleDetected { unresolved: usize },
    #[error("layer `{0}` is not aligned with the DEM")]
    Misaligned(String),
    #[error("only {valid} jointly valid pixels for {features} features")]
    TooFewPixels { valid: usize, features: usize },
    #[error("invalid feature matrix: {0}")]
    InvalidFeatureMatrix(String),
    #[error(transparent)]
    Matrix(#[from] MaxvolError),
}

/// The five morphometric layers, in feature-column order.
#[derive(Debug, Clone)]
pub struct TerrainLayers {
    pub slope: RasterGrid,
    pub aspect: RasterGrid,
    pub depressions: RasterGrid,
    pub accumulation: RasterGrid,
    pub twi: RasterGrid,
    /// Cells with no measurable gradient (aspect forced to 0).
    pub flat: Vec<bool>,
}

pub const LAYER_NAMES: [&str; 5] = ["slope", "aspect", "depressions", "accumulation", "twi"];

impl TerrainLayers {
    pub fn named(&self) -> [(&'static str, &RasterGrid); 5] {
        [
            (LAYER_NAMES[0], &self.slope),
            (LAYER_NAMES[1], &self.aspect),
            (LAYER_NAMES[2], &self.depressions),
            (LAYER_NAMES[3], &self.accumulation),
            (LAYER_NAMES[4], &self.twi),
        ]
    }
}

/// Derives slope, aspect, depression depth, D8 accumulation and TWI.
///
/// Slope and aspect come from the raw DEM. Accumulation and the slope term
/// of TWI use the depression-filled surface water actually routes over.
pub fn derive_layers(dem: &RasterGrid) -> Result<TerrainLayers, TerrainError> {
    let SlopeAspect { slope, aspect, flat } = slope_aspect(dem)?;
    let Filled { filled, depressions } = fill_depressions(dem);
    let accumulation = flow_accumulation(&filled)?;
    let filled_slope = slope_aspect(&filled)?.slope;
    let twi = twi(&filled_slope, &accumulation, dem.cellsize(), DEFAULT_MIN_TAN_SLOPE);
    Ok(TerrainLayers { slope, aspect, depressions, accumulation, twi, flat })
}

/// DEM → layers → normalized feature matrix with coordinate columns.
pub fn features_from_dem(dem: &RasterGrid) -> Result<(TerrainLayers, FeatureMatrix), TerrainError> {
    let layers = derive_layers(dem)?;
    let fm = build_feature_matrix(&layers.named(), dem)?;
    Ok((layers, fm))
}
