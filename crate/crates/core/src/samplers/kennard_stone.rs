use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{check_k, Method, SampleDesign, SampleError};
use crate::terrain::FeatureMatrix;

fn sq_dist(data: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    (0..data.ncols()).map(|q| (data[(i, q)] - data[(j, q)]).powi(2)).sum()
}

/// Kennard–Stone order of the first `k` rows of `data`: the farthest pair,
/// then repeatedly the row farthest from its nearest selected row. Ties go
/// to the lowest row index.
///
/// Panics unless `2 <= k <= data.nrows()`.
pub fn kennard_stone_order(data: &DMatrix<f64>, k: usize) -> Vec<usize> {
    let m = data.nrows();
    assert!(k >= 2 && k <= m, "k = {k} outside [2, {m}]");

    // Farthest pair, lexicographically smallest (i, j) among ties.
    let (first, second, _) = (0..m - 1)
        .into_par_iter()
        .map(|i| {
            let mut best = (i, i + 1, sq_dist(data, i, i + 1));
            for j in i + 2..m {
                let d = sq_dist(data, i, j);
                if d > best.2 {
                    best = (i, j, d);
                }
            }
            best
        })
        .reduce_with(|a, b| if b.2 > a.2 || (b.2 == a.2 && (b.0, b.1) < (a.0, a.1)) { b } else { a })
        .expect("m >= 2");

    let mut order = vec![first, second];
    let mut taken = vec![false; m];
    taken[first] = true;
    taken[second] = true;
    let mut nearest: Vec<f64> = (0..m).map(|i| sq_dist(data, i, first).min(sq_dist(data, i, second))).collect();

    while order.len() < k {
        let mut best: Option<usize> = None;
        for i in 0..m {
            if !taken[i] && best.is_none_or(|b| nearest[i] > nearest[b]) {
                best = Some(i);
            }
        }
        let pick = best.expect("k <= m");
        taken[pick] = true;
        order.push(pick);
        for i in 0..m {
            if !taken[i] {
                nearest[i] = nearest[i].min(sq_dist(data, i, pick));
            }
        }
    }
    order
}

/// Kennard–Stone over every feature column, coordinates included.
pub fn sample_kennard_stone(fm: &FeatureMatrix, k: usize) -> Result<SampleDesign, SampleError> {
    check_k(k, 2, fm.nrows())?;
    let rows = kennard_stone_order(fm.matrix().as_matrix(), k);
    Ok(SampleDesign::from_rows(fm, &rows, Method::KennardStone, 0.0, None))
}
