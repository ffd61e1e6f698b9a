//! Dense small-matrix helpers: operator norms and guarded inversion.

use nalgebra::{DMatrix, DVector};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Reciprocal condition numbers below this are treated as singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

/// Operator 2-norm (largest singular value).
pub fn op_norm(m: &Matrix) -> f64 {
    match m.shape() {
        (0, _) | (_, 0) => 0.0,
        (1, 1) => m[(0, 0)].abs(),
        _ if m.iter().all(|v| *v == 0.0) => 0.0,
        _ if is_diagonal(m) => m.diagonal().amax(),
        _ => m
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .fold(0.0, f64::max),
    }
}

pub fn is_diagonal(m: &Matrix) -> bool {
    m.is_square()
        && m.iter()
            .enumerate()
            .all(|(idx, v)| *v == 0.0 || idx % m.nrows() == idx / m.nrows())
}

fn one_norm(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse by LU with partial pivoting, together with the reciprocal
/// 1-norm condition estimate `1 / (|A|_1 |A^-1|_1)`.
///
/// Returns `None` when the factorisation breaks down.
pub fn inverse_with_rcond(m: &Matrix) -> Option<(Matrix, f64)> {
    if !m.is_square() {
        return None;
    }
    let inv = if is_diagonal(m) {
        let d = m.diagonal();
        if d.iter().any(|v| *v == 0.0) {
            return None;
        }
        Matrix::from_diagonal(&d.map(|v| 1.0 / v))
    } else {
        m.clone().lu().try_inverse()?
    };
    if inv.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let rcond = 1.0 / (one_norm(m) * one_norm(&inv));
    Some((inv, rcond))
}

/// Euclidean norm of a vector.
pub fn vnorm(v: &Vector) -> f64 {
    v.norm()
}
