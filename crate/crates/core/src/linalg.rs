//! Small dense linear-algebra helpers shared by the model, transform and
//! controller modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Matrices whose 1-norm condition number exceeds this are rejected.
pub const CONDITION_LIMIT: f64 = 1e12;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Induced 1-norm (max absolute column sum).
pub fn norm_one(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_vec(v: &Vector) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Inverse with a condition-number guard. Returns the inverse and the
/// 1-norm condition estimate.
pub fn inverse_with_condition(m: &Matrix) -> Option<(Matrix, f64)> {
    if !m.is_square() || m.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let inv = m.clone().lu().try_inverse()?;
    let condition = norm_one(m) * norm_one(&inv);
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return None;
    }
    Some((inv, condition))
}

/// Guarded inverse: fails with [`Error::Singular`] when the matrix is not
/// invertible or its condition estimate exceeds [`CONDITION_LIMIT`].
pub fn inverse(m: &Matrix, what: &'static str) -> Result<Matrix> {
    inverse_with_condition(m).map(|(inv, _)| inv).ok_or_else(|| Error::Singular {
        what,
        condition: condition_estimate(m),
    })
}

/// Best-effort condition estimate for error reporting.
pub fn condition_estimate(m: &Matrix) -> f64 {
    match m.clone().lu().try_inverse() {
        Some(inv) => norm_one(m) * norm_one(&inv),
        None => f64::INFINITY,
    }
}

pub fn symmetric_part(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// `max |m + mᵀ|`.
pub fn skew_defect(m: &Matrix) -> f64 {
    max_abs(&(m + m.transpose()))
}

/// `max |m - mᵀ|`.
pub fn symmetry_defect(m: &Matrix) -> f64 {
    max_abs(&(m - m.transpose()))
}

/// Eigenvalues of the symmetric part, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    let mut eig: Vec<f64> = symmetric_part(m).symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    eig
}

pub fn min_symmetric_eigenvalue(m: &Matrix) -> f64 {
    symmetric_eigenvalues(m).first().copied().unwrap_or(f64::NAN)
}

pub fn max_symmetric_eigenvalue(m: &Matrix) -> f64 {
    symmetric_eigenvalues(m).last().copied().unwrap_or(f64::NAN)
}

/// Symmetric (to 1e-10 relative) with strictly positive eigenvalues.
pub fn is_positive_definite(m: &Matrix) -> bool {
    m.is_square()
        && symmetry_defect(m) <= 1e-10 * max_abs(m).max(1.0)
        && min_symmetric_eigenvalue(m) > 0.0
}

/// Numerical rank from the singular values, relative tolerance `rtol`.
pub fn rank(m: &Matrix, rtol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let largest = sv.iter().fold(0.0, |acc: f64, x| acc.max(*x));
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rtol * largest).count()
}

/// Rows `[r0, r0 + rows)` and columns `[c0, c0 + cols)` as an owned matrix.
pub fn block(m: &Matrix, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
    m.view((r0, c0), (rows, cols)).into_owned()
}

pub fn segment(v: &Vector, start: usize, len: usize) -> Vector {
    v.rows(start, len).into_owned()
}

/// Stack vectors end to end.
pub fn concat(parts: &[&Vector]) -> Vector {
    let len = parts.iter().map(|p| p.len()).sum();
    let mut out = Vector::zeros(len);
    let mut offset = 0;
    for p in parts {
        out.rows_mut(offset, p.len()).copy_from(p);
        offset += p.len();
    }
    out
}

pub fn from_rows(rows: &[Vec<f64>]) -> Matrix {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    Matrix::from_fn(nrows, ncols, |i, j| rows[i][j])
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn guarded_inverse_rejects_ill_conditioned() {
        let m = dmatrix![1.0, 0.0; 0.0, 1e-14];
        assert!(matches!(inverse(&m, "m"), Err(Error::Singular { .. })));
        let ok = dmatrix![2.0, 1.0; 1.0, 3.0];
        let inv = inverse(&ok, "ok").unwrap();
        assert!(max_abs(&(&ok * inv - Matrix::identity(2, 2))) < 1e-14);
    }

    #[test]
    fn definiteness_and_skewness() {
        assert!(is_positive_definite(&dmatrix![2.0, 1.0; 1.0, 2.0]));
        assert!(!is_positive_definite(&dmatrix![1.0, 2.0; 2.0, 1.0]));
        assert_eq!(skew_defect(&dmatrix![0.0, 3.0; -3.0, 0.0]), 0.0);
        assert_eq!(rank(&dmatrix![1.0, 2.0; 2.0, 4.0], 1e-12), 1);
    }

    #[test]
    fn concat_and_segment() {
        let a = Vector::from_vec(vec![1.0, 2.0]);
        let b = Vector::from_vec(vec![3.0]);
        let c = concat(&[&a, &b]);
        assert_eq!(c.as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(segment(&c, 1, 2).as_slice(), &[2.0, 3.0]);
    }
}
