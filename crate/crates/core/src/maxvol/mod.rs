//! Maximum-volume row selection over tall dense matrices.
//!
//! [`maxvol_square`] finds `n` rows of an `m x n` matrix whose square
//! submatrix has a locally maximal `|det|`, swapping one row at a time.
//! [`maxvol_rect`] starts from that square submatrix and greedily appends the
//! rows that grow the rectangular volume `sqrt(det(ÂᵀÂ))` the most, until a
//! requested number of rows is reached.
//!
//! Both routines keep the coefficient matrix `C` (with `A = C·Â`) up to date
//! by rank-one updates and only refactorize every
//! [`MaxvolOptions::refresh_interval`] updates.

mod volume;

pub use volume::{vol_rect, vol_square};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Row veto consulted before a candidate row enters the selection.
///
/// Receives the candidate row index and the rows that would be retained
/// alongside it; returning `true` discards the candidate for the rest of the
/// run.
pub type Veto<'a> = dyn FnMut(usize, &[usize]) -> bool + 'a;

#[derive(Debug, Error)]
pub enum MaxvolError {
    #[error("expected a tall matrix with m >= n >= 1, got {rows}x{cols}")]
    Shape { rows: usize, cols: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is rank deficient: found {rank} independent rows for {cols} columns")]
    RankDeficient { rank: usize, cols: usize },
    #[error("k_points = {k} outside the admissible range [{min}, {max}]")]
    InvalidK { k: usize, min: usize, max: usize },
    #[error("tolerance must be >= 1, got {0}")]
    InvalidTolerance(f64),
    #[error("no convergence within {} swaps", .0.swaps)]
    NoConvergence(Box<MaxvolResult>),
    #[error("vetoes exhausted all candidates after selecting {selected} of {requested} rows")]
    InsufficientPoints { selected: usize, requested: usize },
}

/// Dense `m x n` matrix with `m >= n >= 1` and finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TallMatrix(DMatrix<f64>);

impl TallMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self, MaxvolError> {
        let (rows, cols) = values.shape();
        if cols == 0 || rows < cols {
            return Err(MaxvolError::Shape { rows, cols });
        }
        for col in 0..cols {
            for row in 0..rows {
                if !values[(row, col)].is_finite() {
                    return Err(MaxvolError::NonFinite { row, col });
                }
            }
        }
        Ok(Self(values))
    }

    /// Builds from row-major data.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self, MaxvolError> {
        if data.len() != rows * cols {
            return Err(MaxvolError::Shape { rows, cols });
        }
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MaxvolError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(MaxvolError::Shape { rows: rows.len(), cols });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_slice(rows.len(), cols, &flat)
    }

    /// Entries drawn uniformly from `[0, 1)` with a seeded ChaCha8 stream,
    /// filled column by column.
    pub fn random_uniform(rows: usize, cols: usize, seed: u64) -> Result<Self, MaxvolError> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Self::new(DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>()))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        self.0.select_rows(rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxvolOptions {
    /// Square phase stops once every `|C_ij| <= tol`.
    pub tol: f64,
    /// Cap on accepted square-phase swaps; `None` means `10·m`.
    pub max_swaps: Option<usize>,
    /// Recompute `C` from scratch after this many rank-one updates.
    pub refresh_interval: usize,
}

impl Default for MaxvolOptions {
    fn default() -> Self {
        Self { tol: 1.05, max_swaps: None, refresh_interval: 64 }
    }
}

impl MaxvolOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxvolResult {
    /// Selected row indices in selection order.
    pub selected: Vec<usize>,
    /// `m x K` matrix `C` with `C·Â = A`; its rows at `selected` form `I_K`.
    pub coefficients: DMatrix<f64>,
    /// `vol₁(Â)` when `K = n`, `vol₂(Â)` otherwise.
    pub volume: f64,
    /// Accepted square-phase swaps.
    pub swaps: usize,
    /// Whether the square phase met its tolerance before `max_swaps`.
    pub converged: bool,
    /// Candidates discarded by the veto.
    pub vetoed: usize,
    /// Running volume after initialization and after every swap or addition.
    pub volume_trace: Vec<f64>,
}

impl MaxvolResult {
    pub fn k(&self) -> usize {
        self.selected.len()
    }
}

/// Square maxvol: `n` rows whose submatrix has a locally maximal volume.
pub fn maxvol_square(a: &TallMatrix, opts: &MaxvolOptions) -> Result<MaxvolResult, MaxvolError> {
    let state = square_phase(a, opts, None, a.ncols())?;
    let res = state.finish(a, a.ncols());
    if res.converged {
        Ok(res)
    } else {
        Err(MaxvolError::NoConvergence(Box::new(res)))
    }
}

/// Rectangular maxvol: exactly `k_points` rows, `n <= k_points <= m`.
///
/// The veto, when given, is consulted both for square-phase swap targets
/// (against the rows that would be retained) and for every greedy addition
/// (against all rows selected so far). An unconverged square phase is not
/// fatal here: growth continues from the best square submatrix found.
pub fn maxvol_rect(
    a: &TallMatrix,
    k_points: usize,
    opts: &MaxvolOptions,
    mut veto: Option<&mut Veto<'_>>,
) -> Result<MaxvolResult, MaxvolError> {
    let (m, n) = (a.nrows(), a.ncols());
    if k_points < n || k_points > m {
        return Err(MaxvolError::InvalidK { k: k_points, min: n, max: m });
    }
    let mut state = square_phase(a, opts, veto.as_deref_mut(), k_points)?;
    state.grow(a, k_points, opts, veto)?;
    Ok(state.finish(a, k_points))
}

/// Working state shared by both phases.
struct Search {
    selected: Vec<usize>,
    in_set: Vec<bool>,
    banned: Vec<bool>,
    /// `m x k_cap` buffer; the first `selected.len()` columns are live.
    coef: DMatrix<f64>,
    volume: f64,
    trace: Vec<f64>,
    swaps: usize,
    vetoed: usize,
    updates: usize,
    converged: bool,
}

fn check_tol(opts: &MaxvolOptions) -> Result<(), MaxvolError> {
    if opts.tol.is_nan() || opts.tol < 1.0 {
        return Err(MaxvolError::InvalidTolerance(opts.tol));
    }
    Ok(())
}

/// Gaussian elimination with row pivoting; returns `n` rows in pivot order.
fn pivoted_rows(
    a: &TallMatrix,
    banned: &mut [bool],
    mut veto: Option<&mut Veto<'_>>,
    requested: usize,
    vetoed: &mut usize,
) -> Result<Vec<usize>, MaxvolError> {
    let (m, n) = (a.nrows(), a.ncols());
    let mut work = a.as_matrix().clone();
    let scale = work.amax();
    let threshold = if scale > 0.0 { scale * 1e-12 } else { f64::MIN_POSITIVE };
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    let mut taken = vec![false; m];

    for j in 0..n {
        let pivot = loop {
            let mut best: Option<(usize, f64)> = None;
            for (i, &x) in work.column(j).iter().enumerate() {
                if taken[i] || banned[i] {
                    continue;
                }
                let mag = x.abs();
                if best.is_none_or(|(_, b)| mag > b) {
                    best = Some((i, mag));
                }
            }
            match best {
                Some((i, mag)) if mag > threshold => {
                    if let Some(v) = veto.as_deref_mut() {
                        if v(i, &chosen) {
                            banned[i] = true;
                            *vetoed += 1;
                            continue;
                        }
                    }
                    break i;
                }
                _ if *vetoed > 0 => {
                    return Err(MaxvolError::InsufficientPoints { selected: j, requested });
                }
                _ => return Err(MaxvolError::RankDeficient { rank: j, cols: n }),
            }
        };
        taken[pivot] = true;
        chosen.push(pivot);
        let col_j = work.column(j).clone_owned();
        let p = work[(pivot, j)];
        for q in j + 1..n {
            let f = work[(pivot, q)] / p;
            if f != 0.0 {
                work.column_mut(q).axpy(-f, &col_j, 1.0);
            }
        }
    }
    Ok(chosen)
}

/// `A·Â⁻¹` for a square selection.
fn square_coefficients(a: &TallMatrix, selected: &[usize]) -> Option<DMatrix<f64>> {
    let sub = a.select_rows(selected);
    let lu = sub.transpose().lu();
    lu.solve(&a.as_matrix().transpose()).map(|ct| ct.transpose())
}

/// `A·pinv(Â)` for a tall selection, via a QR factorization of `Â`.
fn rect_coefficients(a: &TallMatrix, selected: &[usize]) -> Option<DMatrix<f64>> {
    let sub = a.select_rows(selected);
    let qr = sub.qr();
    let (q, r) = (qr.q(), qr.r());
    let bt = r.tr_solve_upper_triangular(&a.as_matrix().transpose())?;
    Some((q * bt).transpose())
}

fn square_phase(
    a: &TallMatrix,
    opts: &MaxvolOptions,
    mut veto: Option<&mut Veto<'_>>,
    k_cap: usize,
) -> Result<Search, MaxvolError> {
    check_tol(opts)?;
    let (m, n) = (a.nrows(), a.ncols());
    let mut banned = vec![false; m];
    let mut vetoed = 0;
    let selected = pivoted_rows(a, &mut banned, veto.as_deref_mut(), k_cap, &mut vetoed)?;
    let mut in_set = vec![false; m];
    for &i in &selected {
        in_set[i] = true;
    }
    let c = square_coefficients(a, &selected).ok_or(MaxvolError::RankDeficient { rank: n - 1, cols: n })?;
    let mut coef = DMatrix::zeros(m, k_cap);
    coef.columns_mut(0, n).copy_from(&c);
    let volume = vol_square(&a.select_rows(&selected));

    let mut s = Search {
        selected,
        in_set,
        banned,
        coef,
        volume,
        trace: vec![volume],
        swaps: 0,
        vetoed,
        updates: 0,
        converged: false,
    };

    let max_swaps = opts.max_swaps.unwrap_or(10 * m);
    let mut retained = Vec::with_capacity(n);
    loop {
        let Some((i, j, cij)) = s.largest_coefficient(n) else {
            s.converged = true;
            break;
        };
        if cij.abs() <= opts.tol {
            s.converged = true;
            break;
        }
        if s.swaps >= max_swaps {
            break;
        }
        if let Some(v) = veto.as_deref_mut() {
            retained.clear();
            retained.extend(s.selected.iter().enumerate().filter(|&(p, _)| p != j).map(|(_, &r)| r));
            if v(i, &retained) {
                s.banned[i] = true;
                s.vetoed += 1;
                continue;
            }
        }
        s.swap(i, j, cij, n);
        s.volume *= cij.abs();
        s.trace.push(s.volume);
        s.swaps += 1;
        s.updates += 1;
        if s.updates.is_multiple_of(opts.refresh_interval.max(1)) {
            if let Some(c) = square_coefficients(a, &s.selected) {
                s.coef.columns_mut(0, n).copy_from(&c);
            }
        }
    }
    Ok(s)
}

impl Search {
    /// `(i, j, C_ij)` maximizing `|C_ij|` over eligible rows; lowest row,
    /// then lowest column on ties.
    fn largest_coefficient(&self, width: usize) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for j in 0..width {
            for (i, &x) in self.coef.column(j).iter().enumerate() {
                if self.in_set[i] || self.banned[i] {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bi, bj, bx)) => {
                        let (mag, bmag) = (x.abs(), bx.abs());
                        mag > bmag || (mag == bmag && (i, j) < (bi, bj))
                    }
                };
                if better {
                    best = Some((i, j, x));
                }
            }
        }
        best
    }

    /// Replace the row at position `j` by row `i`:
    /// `C ← C − C[:, j]·(C[i, :] − e_j)ᵀ / C_ij`.
    fn swap(&mut self, i: usize, j: usize, cij: f64, width: usize) {
        let col_j = self.coef.column(j).clone_owned();
        let mut row_i: Vec<f64> = (0..width).map(|q| self.coef[(i, q)]).collect();
        row_i[j] -= 1.0;
        for (q, &r) in row_i.iter().enumerate() {
            let f = r / cij;
            if f != 0.0 {
                self.coef.column_mut(q).axpy(-f, &col_j, 1.0);
            }
        }
        let old = self.selected[j];
        self.in_set[old] = false;
        self.in_set[i] = true;
        self.selected[j] = i;
    }

    fn grow(
        &mut self,
        a: &TallMatrix,
        k_points: usize,
        opts: &MaxvolOptions,
        mut veto: Option<&mut Veto<'_>>,
    ) -> Result<(), MaxvolError> {
        let m = a.nrows();
        let mut scores: Vec<f64> = (0..m)
            .map(|i| {
                let width = self.selected.len();
                (0..width).map(|q| self.coef[(i, q)].powi(2)).sum()
            })
            .collect();

        while self.selected.len() < k_points {
            let width = self.selected.len();
            let mut best: Option<usize> = None;
            for (i, &sc) in scores.iter().enumerate() {
                if self.in_set[i] || self.banned[i] {
                    continue;
                }
                if best.is_none_or(|b| sc > scores[b]) {
                    best = Some(i);
                }
            }
            let Some(i) = best else {
                return Err(MaxvolError::InsufficientPoints { selected: width, requested: k_points });
            };
            if let Some(v) = veto.as_deref_mut() {
                if v(i, &self.selected) {
                    self.banned[i] = true;
                    self.vetoed += 1;
                    continue;
                }
            }

            let score = scores[i].max(0.0);
            let c = DVector::from_iterator(width, (0..width).map(|q| self.coef[(i, q)]));
            let v = self.coef.columns(0, width) * &c;
            let l = 1.0 / (1.0 + score);
            for q in 0..width {
                let f = l * c[q];
                if f != 0.0 {
                    self.coef.column_mut(q).axpy(-f, &v, 1.0);
                }
            }
            self.coef.set_column(width, &(&v * l));
            for (s, &vr) in scores.iter_mut().zip(v.iter()) {
                *s -= l * vr * vr;
            }

            self.selected.push(i);
            self.in_set[i] = true;
            self.volume *= (1.0 + score).sqrt();
            self.trace.push(self.volume);
            self.updates += 1;

            if self.updates.is_multiple_of(opts.refresh_interval.max(1)) {
                let width = self.selected.len();
                if let Some(c) = rect_coefficients(a, &self.selected) {
                    self.coef.columns_mut(0, width).copy_from(&c);
                    for (r, s) in scores.iter_mut().enumerate() {
                        *s = (0..width).map(|q| self.coef[(r, q)].powi(2)).sum();
                    }
                }
            }
        }
        Ok(())
    }

    fn finish(self, a: &TallMatrix, k_cap: usize) -> MaxvolResult {
        let k = self.selected.len();
        let mut coefficients = if k == k_cap { self.coef } else { self.coef.columns(0, k).into_owned() };
        for (p, &row) in self.selected.iter().enumerate() {
            coefficients.row_mut(row).fill(0.0);
            coefficients[(row, p)] = 1.0;
        }
        let sub = a.select_rows(&self.selected);
        let volume = if k == a.ncols() { vol_square(&sub) } else { vol_rect(&sub) };
        MaxvolResult {
            selected: self.selected,
            coefficients,
            volume,
            swaps: self.swaps,
            converged: self.converged,
            vetoed: self.vetoed,
            volume_trace: self.trace,
        }
    }
}

#[cfg(test)]
mod tests;
