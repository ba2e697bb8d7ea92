use std::f64::consts::TAU;

use super::TerrainError;
use crate::raster::RasterGrid;

/// Lower bound on `tan(slope)` inside the TWI logarithm.
pub const DEFAULT_MIN_TAN_SLOPE: f64 = 0.001;

const FLAT_GRADIENT: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SlopeAspect {
    /// Radians in `[0, π/2)`.
    pub slope: RasterGrid,
    /// Downslope azimuth in radians, `[0, 2π)`, 0 = north, clockwise.
    pub aspect: RasterGrid,
    pub flat: Vec<bool>,
}

/// Horn 3x3 gradients.
///
/// Neighbors outside the grid are replicated from the nearest edge cell and
/// NODATA neighbors take the center value; NODATA centers stay NODATA.
pub fn slope_aspect(dem: &RasterGrid) -> Result<SlopeAspect, TerrainError> {
    let (nrows, ncols) = (dem.nrows(), dem.ncols());
    if nrows < 3 || ncols < 3 {
        return Err(TerrainError::TooSmall { nrows, ncols });
    }
    let cs = dem.cellsize();
    let mut flat = vec![false; nrows * ncols];
    let mut slope_v = vec![None; nrows * ncols];
    let mut aspect_v = vec![None; nrows * ncols];

    for r in 0..nrows {
        for c in 0..ncols {
            let Some(z0) = dem.get(r, c) else { continue };
            let z = |dr: isize, dc: isize| {
                let rr = (r as isize + dr).clamp(0, nrows as isize - 1) as usize;
                let cc = (c as isize + dc).clamp(0, ncols as isize - 1) as usize;
                dem.get(rr, cc).unwrap_or(z0)
            };
            let (a, b, cc) = (z(-1, -1), z(-1, 0), z(-1, 1));
            let (d, f) = (z(0, -1), z(0, 1));
            let (g, h, i) = (z(1, -1), z(1, 0), z(1, 1));
            // x grows east, y grows north (row 0 is the north edge)
            let dzdx = ((cc + 2.0 * f + i) - (a + 2.0 * d + g)) / (8.0 * cs);
            let dzdy = ((a + 2.0 * b + cc) - (g + 2.0 * h + i)) / (8.0 * cs);
            let grad = dzdx.hypot(dzdy);
            let idx = r * ncols + c;
            slope_v[idx] = Some(grad.atan());
            if grad < FLAT_GRADIENT {
                flat[idx] = true;
                aspect_v[idx] = Some(0.0);
            } else {
                let mut az = (-dzdx).atan2(-dzdy);
                if az < 0.0 {
                    az += TAU;
                }
                if az >= TAU {
                    az -= TAU;
                }
                aspect_v[idx] = Some(az);
            }
        }
    }
    let geo = *dem.geometry();
    Ok(SlopeAspect {
        slope: RasterGrid::from_fn(geo, |r, c| slope_v[r * ncols + c]),
        aspect: RasterGrid::from_fn(geo, |r, c| aspect_v[r * ncols + c]),
        flat,
    })
}

/// `ln(accumulation · cellsize / max(tan(slope), min_tan_slope))`.
///
/// Panics if the two grids are not aligned.
pub fn twi(slope: &RasterGrid, accumulation: &RasterGrid, cellsize: f64, min_tan_slope: f64) -> RasterGrid {
    assert!(slope.aligned_with(accumulation), "slope and accumulation grids differ in shape");
    RasterGrid::from_fn(*slope.geometry(), |r, c| {
        let s = slope.get(r, c)?;
        let a = accumulation.get(r, c)?;
        Some((a * cellsize / s.tan().max(min_tan_slope)).ln())
    })
}
