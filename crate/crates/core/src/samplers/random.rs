use rand::seq::index;

use super::{check_k, Method, RngSeed, SampleDesign, SampleError};
use crate::terrain::FeatureMatrix;

/// `k` distinct rows drawn uniformly without replacement.
pub fn sample_random(fm: &FeatureMatrix, k: usize, seed: RngSeed) -> Result<SampleDesign, SampleError> {
    check_k(k, 1, fm.nrows())?;
    let mut rng = seed.rng();
    let rows = index::sample(&mut rng, fm.nrows(), k).into_vec();
    Ok(SampleDesign::from_rows(fm, &rows, Method::Random, 0.0, Some(seed)))
}
