use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::TerrainError;
use crate::maxvol::TallMatrix;
use crate::raster::{GridGeometry, RasterGrid};

/// Min-max record of one feature column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub name: String,
    pub min: f64,
    pub max: f64,
    /// Constant column, normalized to all zeros.
    pub degenerate: bool,
}

impl NormRecord {
    pub fn normalize(&self, v: f64) -> f64 {
        if self.degenerate {
            0.0
        } else {
            (v - self.min) / (self.max - self.min)
        }
    }

    pub fn denormalize(&self, t: f64) -> f64 {
        self.min + t * (self.max - self.min)
    }

    fn fit(name: &str, values: impl Iterator<Item = f64>) -> Self {
        let (min, max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Self { name: name.to_string(), min, max, degenerate: max <= min }
    }
}

/// Tall matrix of normalized per-pixel features; the last two columns are
/// the normalized world x and y of the pixel center.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    matrix: TallMatrix,
    pixel_index: Vec<(usize, usize)>,
    feature_names: Vec<String>,
    norm_records: Vec<NormRecord>,
    geometry: GridGeometry,
}

impl FeatureMatrix {
    pub fn new(
        matrix: TallMatrix,
        pixel_index: Vec<(usize, usize)>,
        feature_names: Vec<String>,
        norm_records: Vec<NormRecord>,
        geometry: GridGeometry,
    ) -> Result<Self, TerrainError> {
        let bad = |msg: String| Err(TerrainError::InvalidFeatureMatrix(msg));
        let (m, n) = (matrix.nrows(), matrix.ncols());
        if n < 2 {
            return bad(format!("need at least the two coordinate columns, got {n}"));
        }
        if pixel_index.len() != m {
            return bad(format!("{} pixel indices for {m} rows", pixel_index.len()));
        }
        if feature_names.len() != n || norm_records.len() != n {
            return bad(format!(
                "{} names and {} norm records for {n} columns",
                feature_names.len(),
                norm_records.len()
            ));
        }
        geometry.validate().map_err(|e| TerrainError::InvalidFeatureMatrix(e.to_string()))?;
        let mut seen = HashSet::with_capacity(m);
        for &(r, c) in &pixel_index {
            if r >= geometry.nrows || c >= geometry.ncols {
                return bad(format!("pixel ({r}, {c}) outside the {}x{} grid", geometry.nrows, geometry.ncols));
            }
            if !seen.insert((r, c)) {
                return bad(format!("pixel ({r}, {c}) listed twice"));
            }
        }
        if let Some(v) = matrix.as_matrix().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return bad(format!("entry {v} outside [0, 1]"));
        }
        Ok(Self { matrix, pixel_index, feature_names, norm_records, geometry })
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &TallMatrix {
        &self.matrix
    }

    pub fn pixel_index(&self) -> &[(usize, usize)] {
        &self.pixel_index
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn norm_records(&self) -> &[NormRecord] {
        &self.norm_records
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn degenerate_columns(&self) -> Vec<&str> {
        self.norm_records.iter().filter(|r| r.degenerate).map(|r| r.name.as_str()).collect()
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.matrix.as_matrix()[(row, col)]
    }

    /// Normalized `(x, y)` of a matrix row.
    #[inline]
    pub fn coords(&self, row: usize) -> (f64, f64) {
        let n = self.ncols();
        (self.value(row, n - 2), self.value(row, n - 1))
    }

    /// World coordinates of the pixel center behind a matrix row.
    pub fn world(&self, row: usize) -> (f64, f64) {
        let (r, c) = self.pixel_index[row];
        self.geometry.cell_to_world(r, c).expect("pixel index validated at construction")
    }

    /// Columns used for prediction: all of them, or all but the coordinates.
    pub fn predictors(&self, drop_coords: bool) -> DMatrix<f64> {
        let keep = if drop_coords { self.ncols() - 2 } else { self.ncols() };
        self.matrix.as_matrix().columns(0, keep).into_owned()
    }
}

/// Flattens aligned layers into a normalized feature matrix.
///
/// A pixel is kept only if it is valid in the DEM and in every layer. Each
/// layer column and each coordinate axis is min-max scaled to `[0, 1]` over
/// the kept pixels; constant columns become zeros and are flagged in their
/// [`NormRecord`].
pub fn build_feature_matrix(layers: &[(&str, &RasterGrid)], dem: &RasterGrid) -> Result<FeatureMatrix, TerrainError> {
    for (name, layer) in layers {
        if !layer.aligned_with(dem) {
            return Err(TerrainError::Misaligned(name.to_string()));
        }
    }
    let geo = *dem.geometry();
    let pixel_index: Vec<(usize, usize)> = (0..geo.nrows)
        .flat_map(|r| (0..geo.ncols).map(move |c| (r, c)))
        .filter(|&(r, c)| dem.get(r, c).is_some() && layers.iter().all(|(_, l)| l.get(r, c).is_some()))
        .collect();
    let (m, n) = (pixel_index.len(), layers.len() + 2);
    if m < n {
        return Err(TerrainError::TooFewPixels { valid: m, features: n });
    }

    let mut columns: Vec<(String, Vec<f64>)> = layers
        .iter()
        .map(|(name, l)| (name.to_string(), pixel_index.iter().map(|&(r, c)| l.get(r, c).unwrap()).collect()))
        .collect();
    let world: Vec<(f64, f64)> = pixel_index.iter().map(|&(r, c)| geo.cell_to_world(r, c).unwrap()).collect();
    columns.push(("x".into(), world.iter().map(|p| p.0).collect()));
    columns.push(("y".into(), world.iter().map(|p| p.1).collect()));

    let mut data = DMatrix::zeros(m, n);
    let mut norm_records = Vec::with_capacity(n);
    for (j, (name, col)) in columns.iter().enumerate() {
        let rec = NormRecord::fit(name, col.iter().copied());
        for (i, &v) in col.iter().enumerate() {
            data[(i, j)] = rec.normalize(v);
        }
        norm_records.push(rec);
    }
    let names = columns.into_iter().map(|(name, _)| name).collect();
    FeatureMatrix::new(TallMatrix::new(data)?, pixel_index, names, norm_records, geo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::features_from_dem;

    fn geo(nrows: usize, ncols: usize) -> GridGeometry {
        GridGeometry::new(nrows, ncols, 100.0, 200.0, 2.0).unwrap()
    }

    #[test]
    fn single_layer_is_min_max_scaled() {
        let g = geo(1, 3);
        let dem = RasterGrid::from_fn(g, |_, c| Some(c as f64));
        let layer = RasterGrid::from_fn(g, |_, c| Some([1.0, 2.0, 3.0][c]));
        let fm = build_feature_matrix(&[("f", &layer)], &dem).unwrap();
        assert_eq!(fm.ncols(), 3);
        let col: Vec<f64> = (0..3).map(|i| fm.value(i, 0)).collect();
        assert_eq!(col, vec![0.0, 0.5, 1.0]);
        // single row: y is constant and flagged
        assert_eq!(fm.degenerate_columns(), vec!["y"]);
        assert_eq!(fm.feature_names(), &["f", "x", "y"]);
    }

    #[test]
    fn nodata_in_any_layer_drops_the_pixel() {
        let g = geo(3, 3);
        let dem = RasterGrid::from_fn(g, |r, c| Some((r * 3 + c) as f64));
        let a = RasterGrid::from_fn(g, |r, c| ((r, c) != (0, 1)).then_some(c as f64));
        let b = RasterGrid::from_fn(g, |r, c| ((r, c) != (2, 2)).then_some(r as f64));
        let fm = build_feature_matrix(&[("a", &a), ("b", &b)], &dem).unwrap();
        assert_eq!(fm.nrows(), 7);
        assert!(!fm.pixel_index().contains(&(0, 1)));
        assert!(!fm.pixel_index().contains(&(2, 2)));
    }

    #[test]
    fn misaligned_layer_is_rejected() {
        let dem = RasterGrid::from_fn(geo(3, 3), |_, _| Some(0.0));
        let other = RasterGrid::from_fn(geo(3, 4), |_, _| Some(0.0));
        assert!(matches!(build_feature_matrix(&[("o", &other)], &dem), Err(TerrainError::Misaligned(_))));
    }

    #[test]
    fn dem_pipeline_gives_seven_columns() {
        let g = geo(12, 10);
        let dem = RasterGrid::from_fn(g, |r, c| {
            let (x, y) = ((c as f64) - 5.0, (r as f64) - 6.0);
            Some(0.3 * c as f64 - (-(x * x + y * y) / 6.0).exp() * 3.0 + 0.01 * (r * c) as f64)
        });
        let (_, fm) = features_from_dem(&dem).unwrap();
        assert_eq!(fm.ncols(), 7);
        assert_eq!(fm.nrows(), 120);
        assert_eq!(fm.feature_names(), &["slope", "aspect", "depressions", "accumulation", "twi", "x", "y"]);
        assert!(fm.matrix().as_matrix().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn normalization_inverts_and_preserves_order() {
        let g = geo(4, 5);
        let dem = RasterGrid::from_fn(g, |r, c| Some(((r * 7 + c * 3) % 11) as f64 * 1.7 - 3.0));
        let fm = build_feature_matrix(&[("z", &dem)], &dem).unwrap();
        let rec = &fm.norm_records()[0];
        for i in 0..fm.nrows() {
            let (r, c) = fm.pixel_index()[i];
            let raw = dem.get(r, c).unwrap();
            assert!((rec.denormalize(fm.value(i, 0)) - raw).abs() < 1e-12);
            for j in 0..fm.nrows() {
                let (r2, c2) = fm.pixel_index()[j];
                if raw < dem.get(r2, c2).unwrap() {
                    assert!(fm.value(i, 0) < fm.value(j, 0));
                }
            }
        }
    }

    #[test]
    fn too_few_pixels() {
        let dem = RasterGrid::from_fn(geo(1, 2), |_, _| Some(0.0));
        assert!(matches!(
            build_feature_matrix(&[("z", &dem)], &dem),
            Err(TerrainError::TooFewPixels { valid: 2, features: 3 })
        ));
    }

    #[test]
    fn constructor_checks_invariants() {
        let g = geo(2, 2);
        let mat = TallMatrix::from_rows(&[vec![0.0, 0.5], vec![1.0, 0.2]]).unwrap();
        let recs = vec![
            NormRecord { name: "x".into(), min: 0.0, max: 1.0, degenerate: false },
            NormRecord { name: "y".into(), min: 0.0, max: 1.0, degenerate: false },
        ];
        let names = vec!["x".to_string(), "y".to_string()];
        assert!(FeatureMatrix::new(mat.clone(), vec![(0, 0), (0, 0)], names.clone(), recs.clone(), g).is_err());
        assert!(FeatureMatrix::new(mat.clone(), vec![(0, 0), (5, 0)], names.clone(), recs.clone(), g).is_err());
        let out_of_range = TallMatrix::from_rows(&[vec![0.0, 1.5], vec![1.0, 0.2]]).unwrap();
        assert!(FeatureMatrix::new(out_of_range, vec![(0, 0), (1, 1)], names.clone(), recs.clone(), g).is_err());
        assert!(FeatureMatrix::new(mat, vec![(0, 0), (1, 1)], names, recs, g).is_ok());
    }
}
