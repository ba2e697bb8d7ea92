use nalgebra::DMatrix;

/// `|det(M)|` via LU with partial pivoting. Singular input gives 0.
///
/// Panics if `M` is not square.
pub fn vol_square(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "vol_square needs a square matrix, got {:?}", m.shape());
    if m.nrows() == 0 {
        return 1.0;
    }
    m.clone().lu().determinant().abs()
}

/// `sqrt(det(MᵀM))` for a `K x n` matrix with `K >= n`, computed as the
/// product of the diagonal of `R` in `M = QR`.
///
/// Panics if `M` has fewer rows than columns.
pub fn vol_rect(m: &DMatrix<f64>) -> f64 {
    assert!(m.nrows() >= m.ncols(), "vol_rect needs K >= n, got {:?}", m.shape());
    if m.ncols() == 0 {
        return 1.0;
    }
    let r = m.clone().qr().r();
    r.diagonal().iter().map(|d| d.abs()).product()
}
