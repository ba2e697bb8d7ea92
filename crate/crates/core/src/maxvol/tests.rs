use super::*;
use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Oracles: Laplace expansion and explicit Gram matrices, independent of the
// LU/QR paths used by the implementation.

fn det_cofactor(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    match n {
        0 => 1.0,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => (0..n)
            .map(|c| {
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, &x)| x).collect())
                    .collect();
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][c] * det_cofactor(&minor)
            })
            .sum(),
    }
}

fn rows_of(a: &TallMatrix, idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| a.row(i)).collect()
}

fn gram_volume(rows: &[Vec<f64>]) -> f64 {
    let n = rows[0].len();
    let g: Vec<Vec<f64>> = (0..n).map(|p| (0..n).map(|q| rows.iter().map(|r| r[p] * r[q]).sum()).collect()).collect();
    det_cofactor(&g).max(0.0).sqrt()
}

fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::new(), &mut out);
    out
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> TallMatrix {
    let data: Vec<f64> = (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    TallMatrix::from_row_slice(m, n, &data).unwrap()
}

fn example() -> TallMatrix {
    TallMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0], vec![0.5, 0.5]]).unwrap()
}

fn rel_reconstruction_error(a: &TallMatrix, res: &MaxvolResult) -> f64 {
    let sub = a.select_rows(&res.selected);
    let diff = &res.coefficients * sub - a.as_matrix();
    diff.norm() / a.as_matrix().norm()
}

#[test]
fn vol_square_examples() {
    assert_eq!(vol_square(&DMatrix::identity(2, 2)), 1.0);
    let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 2.0]);
    assert_relative_eq!(vol_square(&m), 2.0, epsilon = 1e-12);
    let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    assert_eq!(vol_square(&m), 0.0);
}

#[test]
fn vol_rect_examples() {
    let col = DMatrix::from_row_slice(2, 1, &[3.0, 4.0]);
    assert_relative_eq!(vol_rect(&col), 5.0, epsilon = 1e-12);
    let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 2.0, 2.0]);
    assert_relative_eq!(vol_rect(&m), 3.0, epsilon = 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..5 {
        let sq = random_matrix(&mut rng, n, n).into_inner();
        assert!((vol_rect(&sq) - vol_square(&sq)).abs() < 1e-10);
    }
}

#[test]
fn vol_rect_matches_gram_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let k = rng.random_range(1..7);
        let n = rng.random_range(1..=k.min(4));
        let a = random_matrix(&mut rng, k, n);
        let want = gram_volume(&rows_of(&a, &(0..k).collect::<Vec<_>>()));
        assert_relative_eq!(vol_rect(a.as_matrix()), want, epsilon = 1e-10, max_relative = 1e-9);
    }
}

#[test]
fn tall_matrix_rejects_bad_input() {
    assert!(matches!(TallMatrix::from_row_slice(1, 2, &[1.0, 2.0]), Err(MaxvolError::Shape { rows: 1, cols: 2 })));
    assert!(matches!(
        TallMatrix::from_row_slice(2, 1, &[1.0, f64::NAN]),
        Err(MaxvolError::NonFinite { row: 1, col: 0 })
    ));
    assert!(TallMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
}

#[test]
fn square_example_matches_brute_force() {
    let a = example();
    let res = maxvol_square(&a, &MaxvolOptions::with_tol(1.0 + 1e-9)).unwrap();
    assert_eq!(sorted(res.selected.clone()), vec![0, 2]);
    assert_relative_eq!(res.volume, 2.0, epsilon = 1e-12);

    // Brute force: {0,2} and {1,2} tie at the global max.
    let best = subsets(4, 2).into_iter().map(|s| det_cofactor(&rows_of(&a, &s)).abs()).fold(0.0, f64::max);
    assert_relative_eq!(best, 2.0, epsilon = 1e-12);
}

#[test]
fn square_input_selects_every_row() {
    let a = TallMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
    let res = maxvol_square(&a, &MaxvolOptions::default()).unwrap();
    assert_eq!(sorted(res.selected), vec![0, 1]);
    assert_eq!(res.swaps, 0);
    assert_relative_eq!(res.volume, 5.0, epsilon = 1e-12);
}

#[test]
fn single_column_picks_largest_entry() {
    let a = TallMatrix::from_rows(&[vec![1.0], vec![-5.0], vec![2.0]]).unwrap();
    let res = maxvol_square(&a, &MaxvolOptions::default()).unwrap();
    assert_eq!(res.selected, vec![1]);
    assert_relative_eq!(res.volume, 5.0);
}

#[test]
fn rect_example_matches_brute_force() {
    let a = example();
    let res = maxvol_rect(&a, 3, &MaxvolOptions::default(), None).unwrap();
    assert_eq!(sorted(res.selected.clone()), vec![0, 1, 2]);
    assert_relative_eq!(res.volume, 3.0, epsilon = 1e-12);

    let sq: Vec<f64> = subsets(4, 3).iter().map(|s| gram_volume(&rows_of(&a, s)).powi(2)).collect();
    let want = [9.0, 1.5, 4.25, 4.25];
    for (got, want) in sq.iter().zip(want) {
        assert_relative_eq!(*got, want, epsilon = 1e-12);
    }
}

#[test]
fn rect_with_k_equal_n_is_square_maxvol() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let a = random_matrix(&mut rng, 15, 3);
        let opts = MaxvolOptions::default();
        let sq = maxvol_square(&a, &opts).unwrap();
        let rect = maxvol_rect(&a, 3, &opts, None).unwrap();
        assert_eq!(sq.selected, rect.selected);
    }
}

#[test]
fn rect_with_k_equal_m_takes_everything() {
    let a = example();
    let res = maxvol_rect(&a, 4, &MaxvolOptions::default(), None).unwrap();
    assert_eq!(sorted(res.selected), vec![0, 1, 2, 3]);

    let mut fire = |cand: usize, _: &[usize]| cand == 3;
    let err = maxvol_rect(&a, 4, &MaxvolOptions::default(), Some(&mut fire)).unwrap_err();
    assert!(matches!(err, MaxvolError::InsufficientPoints { selected: 3, requested: 4 }));
}

#[test]
fn invalid_parameters_are_rejected() {
    let a = example();
    assert!(matches!(
        maxvol_rect(&a, 1, &MaxvolOptions::default(), None),
        Err(MaxvolError::InvalidK { k: 1, min: 2, max: 4 })
    ));
    assert!(matches!(maxvol_rect(&a, 5, &MaxvolOptions::default(), None), Err(MaxvolError::InvalidK { .. })));
    assert!(matches!(maxvol_square(&a, &MaxvolOptions::with_tol(0.9)), Err(MaxvolError::InvalidTolerance(_))));
}

#[test]
fn rank_deficient_matrix_is_reported() {
    let a = TallMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![-1.0, -2.0]]).unwrap();
    assert!(matches!(
        maxvol_square(&a, &MaxvolOptions::default()),
        Err(MaxvolError::RankDeficient { rank: 1, cols: 2 })
    ));
    let zero = TallMatrix::new(DMatrix::zeros(4, 2)).unwrap();
    assert!(matches!(
        maxvol_rect(&zero, 3, &MaxvolOptions::default(), None),
        Err(MaxvolError::RankDeficient { rank: 0, .. })
    ));
}

#[test]
fn exhausted_swap_budget_returns_best_so_far() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let tight = MaxvolOptions::with_tol(1.0 + 1e-9);
    let a = (0..200)
        .map(|_| random_matrix(&mut rng, 12, 3))
        .find(|a| maxvol_square(a, &tight).unwrap().swaps > 0)
        .expect("some seeded matrix needs a swap");
    let capped = MaxvolOptions { max_swaps: Some(0), ..tight };
    match maxvol_square(&a, &capped) {
        Err(MaxvolError::NoConvergence(best)) => {
            assert!(!best.converged);
            assert_eq!(best.swaps, 0);
            assert_eq!(best.selected.len(), 3);
        }
        other => panic!("expected NoConvergence, got {other:?}"),
    }
    // rect growth proceeds from the unconverged start
    let res = maxvol_rect(&a, 5, &capped, None).unwrap();
    assert!(!res.converged);
    assert_eq!(res.k(), 5);
}

#[test]
fn refresh_interval_does_not_change_selection() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let a = random_matrix(&mut rng, 200, 5);
        let every = MaxvolOptions { refresh_interval: 1, ..MaxvolOptions::default() };
        let rarely = MaxvolOptions { refresh_interval: 1000, ..MaxvolOptions::default() };
        let x = maxvol_rect(&a, 20, &every, None).unwrap();
        let y = maxvol_rect(&a, 20, &rarely, None).unwrap();
        assert_eq!(x.selected, y.selected);
        assert!((&x.coefficients - &y.coefficients).amax() < 1e-9);
    }
}

#[test]
fn veto_applies_in_square_phase() {
    let a = example();
    // Forbid row 2 from ever entering: the best remaining square pair is {0, 1}.
    let mut no_two = |cand: usize, _: &[usize]| cand == 2;
    let res = maxvol_rect(&a, 2, &MaxvolOptions::with_tol(1.0 + 1e-9), Some(&mut no_two)).unwrap();
    assert!(!res.selected.contains(&2));
    assert_eq!(sorted(res.selected), vec![0, 1]);
    assert!(res.vetoed >= 1);
}

#[test]
fn greedy_quasi_optimality_on_8x2() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 1.0;
    for _ in 0..100 {
        let a = random_matrix(&mut rng, 8, 2);
        let res = maxvol_rect(&a, 4, &MaxvolOptions::default(), None).unwrap();
        let best = subsets(8, 4).iter().map(|s| gram_volume(&rows_of(&a, s))).fold(0.0, f64::max);
        worst = worst.min(res.volume / best);
    }
    assert!(worst >= 0.5, "worst greedy/brute-force ratio {worst}");
}

fn matrix_strategy(max_m: usize, max_n: usize) -> impl Strategy<Value = TallMatrix> {
    (1..=max_n)
        .prop_flat_map(move |n| (Just(n), n..=max_m))
        .prop_flat_map(|(n, m)| proptest::collection::vec(-1.0f64..1.0, m * n).prop_map(move |d| (m, n, d)))
        .prop_map(|(m, n, d)| TallMatrix::from_row_slice(m, n, &d).unwrap())
        .prop_filter("full column rank", |a| {
            let s = a.as_matrix().clone().svd(false, false).singular_values;
            s.min() > 1e-6 * s.max().max(1e-300)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn identity_block_and_reconstruction(a in matrix_strategy(40, 6), extra in 0usize..10) {
        let k = (a.ncols() + extra).min(a.nrows());
        let res = maxvol_rect(&a, k, &MaxvolOptions::default(), None).unwrap();
        let mut seen = res.selected.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), k);
        let block = res.coefficients.select_rows(&res.selected);
        prop_assert!((block - DMatrix::<f64>::identity(k, k)).amax() <= 1e-10);
        prop_assert!(rel_reconstruction_error(&a, &res) <= 1e-8);
    }

    #[test]
    fn square_phase_is_single_swap_optimal(a in matrix_strategy(12, 4)) {
        let tol = 1.0 + 1e-9;
        let res = maxvol_square(&a, &MaxvolOptions::with_tol(tol)).unwrap();
        let vol = det_cofactor(&rows_of(&a, &res.selected)).abs();
        for pos in 0..res.selected.len() {
            for cand in 0..a.nrows() {
                if res.selected.contains(&cand) {
                    continue;
                }
                let mut other = res.selected.clone();
                other[pos] = cand;
                let v = det_cofactor(&rows_of(&a, &other)).abs();
                prop_assert!(v <= vol * tol * (1.0 + 1e-9) + 1e-12, "swap {pos}->{cand}: {v} > {vol}");
            }
        }
    }

    #[test]
    fn volume_trace_is_monotone(a in matrix_strategy(30, 4), extra in 0usize..8) {
        let k = (a.ncols() + extra).min(a.nrows());
        let res = maxvol_rect(&a, k, &MaxvolOptions::default(), None).unwrap();
        let n = a.ncols();
        let square_end = 1 + res.swaps;
        for w in res.volume_trace[..square_end].windows(2) {
            prop_assert!(w[1] > w[0]);
        }
        for w in res.volume_trace[square_end - 1..].windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        prop_assert_eq!(res.volume_trace.len(), 1 + res.swaps + (k - n));
        let last = *res.volume_trace.last().unwrap();
        prop_assert!((last - res.volume).abs() <= 1e-8 * res.volume.max(1.0));
    }

    #[test]
    fn selection_is_scale_equivariant(a in matrix_strategy(30, 4), s in prop::sample::select(vec![0.5, 3.0, 1e3, 0.0078125, 17.25])) {
        let k = (a.ncols() + 3).min(a.nrows());
        let scaled = TallMatrix::new(a.as_matrix() * s).unwrap();
        let x = maxvol_rect(&a, k, &MaxvolOptions::default(), None).unwrap();
        let y = maxvol_rect(&scaled, k, &MaxvolOptions::default(), None).unwrap();
        prop_assert_eq!(sorted(x.selected), sorted(y.selected));
    }
}
