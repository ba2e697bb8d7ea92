use super::{check_k, Method, SampleDesign, SampleError};
use crate::maxvol::{maxvol_rect, MaxvolOptions, TallMatrix};
use crate::terrain::FeatureMatrix;

/// Rejects a candidate whose normalized coordinates fall strictly within
/// `epsilon` of any retained row.
pub fn spacing_veto(fm: &FeatureMatrix, epsilon: f64) -> impl FnMut(usize, &[usize]) -> bool + '_ {
    let eps2 = epsilon * epsilon;
    move |cand, retained| {
        let (x, y) = fm.coords(cand);
        retained.iter().any(|&r| {
            let (xr, yr) = fm.coords(r);
            (x - xr).powi(2) + (y - yr).powi(2) < eps2
        })
    }
}

/// Rectangular maxvol over the feature matrix, discarding candidates closer
/// than `epsilon` (normalized coordinates) to already chosen points.
///
/// Degenerate (constant, all-zero) columns carry no information and would
/// make the matrix rank deficient, so they are left out; `k` must be at
/// least the number of remaining columns.
pub fn sample_maxvol(fm: &FeatureMatrix, k: usize, epsilon: f64) -> Result<SampleDesign, SampleError> {
    sample_maxvol_with(fm, k, epsilon, &MaxvolOptions::default())
}

pub fn sample_maxvol_with(
    fm: &FeatureMatrix,
    k: usize,
    epsilon: f64,
    opts: &MaxvolOptions,
) -> Result<SampleDesign, SampleError> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(SampleError::InvalidEpsilon(epsilon));
    }
    let active: Vec<usize> = (0..fm.ncols()).filter(|&j| !fm.norm_records()[j].degenerate).collect();
    check_k(k, active.len(), fm.nrows())?;
    let reduced;
    let a = if active.len() == fm.ncols() {
        fm.matrix()
    } else {
        reduced = TallMatrix::new(fm.matrix().as_matrix().select_columns(&active))?;
        &reduced
    };
    let result = if epsilon > 0.0 {
        let mut veto = spacing_veto(fm, epsilon);
        maxvol_rect(a, k, opts, Some(&mut veto))?
    } else {
        maxvol_rect(a, k, opts, None)?
    };
    Ok(SampleDesign::from_rows(fm, &result.selected, Method::Maxvol, epsilon, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::test_util::{from_parts, lattice_fm};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_payload(seed: u64, m: usize, cols: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..cols).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect()
    }

    #[test]
    fn zero_epsilon_equals_plain_rect_maxvol() {
        let fm = lattice_fm(10, 12, &random_payload(1, 120, 3));
        for k in [5, 9, 20] {
            let design = sample_maxvol(&fm, k, 0.0).unwrap();
            let plain = maxvol_rect(fm.matrix(), k, &MaxvolOptions::default(), None).unwrap();
            assert_eq!(design.rows(), plain.selected);
        }
    }

    #[test]
    fn designs_respect_spacing() {
        let fm = lattice_fm(15, 15, &random_payload(2, 225, 3));
        for eps in [0.1, 0.2, 0.3] {
            let d = sample_maxvol(&fm, 8, eps).unwrap();
            assert!(d.is_valid(&fm));
            assert!(d.min_sq_spacing(&fm).unwrap() >= eps * eps);
        }
    }

    #[test]
    fn close_runner_up_is_vetoed_and_next_row_taken() {
        // Two planted rows dominate a weak background: row 44 (payload 1.0) and
        // a close twin (payload 0.98) whose coordinates sit 0.05 east of it.
        let (nrows, ncols) = (10, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = nrows * ncols;
        let mut data = DMatrix::zeros(m, 3);
        let mut pix = Vec::new();
        for r in 0..nrows {
            for c in 0..ncols {
                let i = r * ncols + c;
                data[(i, 0)] = rng.random_range(0.0..0.2);
                data[(i, 1)] = c as f64 / 9.0;
                data[(i, 2)] = (9 - r) as f64 / 9.0;
                pix.push((r, c));
            }
        }
        let (best, twin) = (44, 45);
        data[(best, 0)] = 1.0;
        data[(twin, 0)] = 0.98;
        data[(twin, 1)] = data[(best, 1)] + 0.05;
        let fm = from_parts(data.clone(), pix, nrows, ncols);
        let k = 5;

        let free = sample_maxvol(&fm, k, 0.0).unwrap().rows();
        let constrained = sample_maxvol(&fm, k, 0.1).unwrap().rows();
        assert!(free.contains(&best) && free.contains(&twin), "{free:?}");
        assert!(constrained.contains(&best) && !constrained.contains(&twin), "{constrained:?}");

        // Oracle: replay the selection by brute-force Gram determinants.
        // From the constrained prefix before the twin would have entered,
        // rank the candidates by the volume of the grown submatrix.
        let a = TallMatrix::new(data).unwrap();
        let pos = free.iter().position(|&r| r == twin).unwrap();
        assert!(pos >= 3, "twin should enter during the greedy phase, got position {pos}");
        let prefix = &free[..pos];
        assert_eq!(&constrained[..pos], prefix);
        let mut ranked: Vec<(usize, f64)> = (0..m)
            .filter(|i| !prefix.contains(i))
            .map(|i| {
                let mut rows = prefix.to_vec();
                rows.push(i);
                (i, crate::maxvol::vol_rect(&a.select_rows(&rows)))
            })
            .collect();
        ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        assert_eq!(ranked[0].0, twin);
        let veto_ok = |i: usize| {
            let (x, y) = fm.coords(i);
            prefix.iter().all(|&p| {
                let (px, py) = fm.coords(p);
                (x - px).powi(2) + (y - py).powi(2) >= 0.01
            })
        };
        let third = ranked.iter().skip(1).find(|(i, _)| veto_ok(*i)).unwrap().0;
        assert_eq!(constrained[pos], third);
    }

    #[test]
    fn rejects_bad_arguments() {
        let fm = lattice_fm(5, 5, &random_payload(3, 25, 1));
        assert!(matches!(sample_maxvol(&fm, 2, 0.0), Err(SampleError::InvalidK { k: 2, min: 3, max: 25 })));
        assert!(matches!(sample_maxvol(&fm, 4, -0.1), Err(SampleError::InvalidEpsilon(_))));
    }

    #[test]
    fn degenerate_columns_are_skipped() {
        let mut payload = random_payload(5, 64, 2);
        payload.insert(1, vec![0.0; 64]);
        let fm = lattice_fm(8, 8, &payload);
        let mut recs = fm.norm_records().to_vec();
        recs[1].degenerate = true;
        let fm = FeatureMatrix::new(
            fm.matrix().clone(),
            fm.pixel_index().to_vec(),
            fm.feature_names().to_vec(),
            recs,
            *fm.geometry(),
        )
        .unwrap();
        let design = sample_maxvol(&fm, 4, 0.0).unwrap();
        let reduced = TallMatrix::new(fm.matrix().as_matrix().select_columns(&[0, 2, 3, 4])).unwrap();
        let plain = maxvol_rect(&reduced, 4, &MaxvolOptions::default(), None).unwrap();
        assert_eq!(design.rows(), plain.selected);
        assert!(matches!(sample_maxvol(&fm, 3, 0.0), Err(SampleError::InvalidK { k: 3, min: 4, max: 64 })));
    }

    #[test]
    fn huge_epsilon_reports_achieved_count() {
        let fm = lattice_fm(6, 6, &random_payload(4, 36, 1));
        match sample_maxvol(&fm, 5, 0.9) {
            Err(SampleError::InsufficientPoints { achieved, requested: 5 }) => assert!(achieved < 5),
            other => panic!("expected InsufficientPoints, got {other:?}"),
        }
    }
}
