//! Seeded synthetic sites: a tilted plane with Gaussian hollows and smooth
//! microrelief, plus a four-class reference soil map derived from wetness
//! and depression depth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{ClassMap, EvalError, Label};
use crate::raster::{GridGeometry, RasterError, RasterGrid, DEFAULT_NODATA};
use crate::terrain::{derive_layers, TerrainError, TerrainLayers};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid site spec: {0}")]
    InvalidSpec(String),
    #[error("DegenerateSpec: empty class in histogram {}", format_histogram(.0))]
    DegenerateSpec(Vec<(Label, usize)>),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Terrain(#[from] TerrainError),
    #[error(transparent)]
    Classes(#[from] EvalError),
}

fn format_histogram(h: &[(Label, usize)]) -> String {
    let parts: Vec<String> = h.iter().map(|(c, n)| format!("{c}:{n}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Gaussian pit `amplitude * exp(-r^2 / (2 radius^2))` subtracted from the
/// surface. `center` is in meters from the lower-left grid corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hollow {
    pub center: (f64, f64),
    pub amplitude: f64,
    pub radius: f64,
}

/// Class assignment, first match wins: depression depth above
/// `depression_depth` is class 3, TWI above `wet_twi` class 2, TWI below
/// `crest_twi` class 0, everything else class 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassRules {
    pub depression_depth: f64,
    pub crest_twi: f64,
    pub wet_twi: f64,
}

pub const N_CLASSES: usize = 4;

impl ClassRules {
    pub fn classify(&self, depth: f64, twi: f64) -> Label {
        if depth > self.depression_depth {
            3
        } else if twi > self.wet_twi {
            2
        } else if twi < self.crest_twi {
            0
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SiteSpec {
    pub nrows: usize,
    pub ncols: usize,
    pub cellsize: f64,
    pub xllcorner: f64,
    pub yllcorner: f64,
    pub base_elevation: f64,
    /// Rise per meter east and north.
    pub base_gradient: (f64, f64),
    pub hollows: Vec<Hollow>,
    /// Half-width of the uniform values on the noise lattice.
    pub noise_amplitude: f64,
    /// Noise lattice spacing in cells.
    pub noise_spacing: usize,
    pub seed: u64,
    pub class_rules: ClassRules,
}

impl Default for SiteSpec {
    /// 100 x 130 cells at 2.5 m: a north-rising slope with two closed
    /// depressions and three open hollows.
    fn default() -> Self {
        Self {
            nrows: 100,
            ncols: 130,
            cellsize: 2.5,
            xllcorner: 0.0,
            yllcorner: 0.0,
            base_elevation: 180.0,
            base_gradient: (0.01, 0.03),
            hollows: vec![
                Hollow { center: (60.0, 80.0), amplitude: 2.0, radius: 18.0 },
                Hollow { center: (240.0, 150.0), amplitude: 2.5, radius: 22.0 },
                Hollow { center: (160.0, 60.0), amplitude: 0.8, radius: 25.0 },
                Hollow { center: (100.0, 190.0), amplitude: 0.6, radius: 20.0 },
                Hollow { center: (280.0, 50.0), amplitude: 0.7, radius: 15.0 },
            ],
            noise_amplitude: 0.05,
            noise_spacing: 8,
            seed: 42,
            class_rules: ClassRules { depression_depth: 0.1, crest_twi: 5.0, wet_twi: 8.3 },
        }
    }
}

impl SiteSpec {
    /// 217 x 285 cells at 2.5 m, with the default landforms scaled to fit.
    pub fn field_scale() -> Self {
        let base = Self::default();
        let sx = 285.0 / base.ncols as f64;
        let sy = 217.0 / base.nrows as f64;
        Self {
            nrows: 217,
            ncols: 285,
            hollows: base
                .hollows
                .iter()
                .map(|h| Hollow {
                    center: (h.center.0 * sx, h.center.1 * sy),
                    amplitude: h.amplitude * 1.5,
                    radius: h.radius * 1.5,
                })
                .collect(),
            ..base
        }
    }

    pub fn geometry(&self) -> Result<GridGeometry, SynthError> {
        Ok(GridGeometry::new(self.nrows, self.ncols, self.xllcorner, self.yllcorner, self.cellsize)?)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: &str| Err(SynthError::InvalidSpec(msg.to_string()));
        self.geometry()?;
        if self.nrows < 3 || self.ncols < 3 {
            return bad("grid must be at least 3x3");
        }
        let finite = [self.base_elevation, self.base_gradient.0, self.base_gradient.1, self.noise_amplitude];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("elevation, gradient and noise must be finite");
        }
        if self.noise_amplitude < 0.0 {
            return bad("noise_amplitude must be >= 0");
        }
        if self.noise_spacing == 0 {
            return bad("noise_spacing must be >= 1");
        }
        for h in &self.hollows {
            if !(h.amplitude > 0.0 && h.radius > 0.0 && h.amplitude.is_finite() && h.radius.is_finite()) {
                return bad("hollow amplitudes and radii must be positive");
            }
            if !(h.center.0.is_finite() && h.center.1.is_finite()) {
                return bad("hollow centers must be finite");
            }
        }
        let r = &self.class_rules;
        if !(r.depression_depth >= 0.0 && r.crest_twi < r.wet_twi && r.crest_twi.is_finite() && r.wet_twi.is_finite()) {
            return bad("class rules need depression_depth >= 0 and crest_twi < wet_twi");
        }
        Ok(())
    }
}

/// Bilinear interpolation of a seeded coarse lattice of uniform values.
fn smooth_noise(spec: &SiteSpec) -> Vec<f64> {
    let (nr, nc) = (spec.nrows, spec.ncols);
    if spec.noise_amplitude == 0.0 {
        return vec![0.0; nr * nc];
    }
    let s = spec.noise_spacing;
    let (lr, lc) = ((nr - 1) / s + 2, (nc - 1) / s + 2);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lattice: Vec<f64> =
        (0..lr * lc).map(|_| rng.random_range(-spec.noise_amplitude..=spec.noise_amplitude)).collect();
    let mut out = Vec::with_capacity(nr * nc);
    for r in 0..nr {
        let (i, fr) = (r / s, (r % s) as f64 / s as f64);
        for c in 0..nc {
            let (j, fc) = (c / s, (c % s) as f64 / s as f64);
            let at = |a: usize, b: usize| lattice[a * lc + b];
            let top = at(i, j) * (1.0 - fc) + at(i, j + 1) * fc;
            let bottom = at(i + 1, j) * (1.0 - fc) + at(i + 1, j + 1) * fc;
            out.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    out
}

/// Surface elevation without noise at a point `(x, y)` meters from the
/// lower-left corner.
pub fn analytic_surface(spec: &SiteSpec, x: f64, y: f64) -> f64 {
    let (gx, gy) = spec.base_gradient;
    let pits: f64 = spec
        .hollows
        .iter()
        .map(|h| {
            let d2 = (x - h.center.0).powi(2) + (y - h.center.1).powi(2);
            h.amplitude * (-d2 / (2.0 * h.radius * h.radius)).exp()
        })
        .sum();
    spec.base_elevation + gx * x + gy * y - pits
}

pub fn generate_dem(spec: &SiteSpec) -> Result<RasterGrid, SynthError> {
    spec.validate()?;
    let geo = spec.geometry()?;
    let noise = smooth_noise(spec);
    let values = (0..spec.nrows)
        .flat_map(|r| (0..spec.ncols).map(move |c| (r, c)))
        .map(|(r, c)| {
            let x = (c as f64 + 0.5) * spec.cellsize;
            let y = (spec.nrows - 1 - r) as f64 * spec.cellsize + 0.5 * spec.cellsize;
            analytic_surface(spec, x, y) + noise[r * spec.ncols + c]
        })
        .collect();
    Ok(RasterGrid::new(geo, DEFAULT_NODATA, values)?)
}

/// Applies the class rules to derived layers.
pub fn classify(layers: &TerrainLayers, rules: &ClassRules) -> RasterGrid {
    let geo = *layers.twi.geometry();
    RasterGrid::from_fn(geo, |r, c| {
        let depth = layers.depressions.get(r, c)?;
        let twi = layers.twi.get(r, c)?;
        Some(rules.classify(depth, twi) as f64)
    })
}

/// DEM and reference class map of a site. Fails with the class histogram if
/// any of the four classes is empty.
pub fn generate_site(spec: &SiteSpec) -> Result<(RasterGrid, ClassMap), SynthError> {
    let dem = generate_dem(spec)?;
    let layers = derive_layers(&dem)?;
    let classes = classify(&layers, &spec.class_rules);
    let mut histogram: Vec<(Label, usize)> = (0..N_CLASSES as Label).map(|c| (c, 0)).collect();
    for v in classes.values() {
        histogram[*v as usize].1 += 1;
    }
    if histogram.iter().any(|(_, n)| *n == 0) {
        return Err(SynthError::DegenerateSpec(histogram));
    }
    Ok((dem, ClassMap::new(classes)?))
}
