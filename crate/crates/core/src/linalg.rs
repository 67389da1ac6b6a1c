//! Small dense helpers shared by the scatter and incremental modules.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Cholesky factorization of a symmetric positive definite matrix with a relative
/// pivot check: fails when `min pivot < tol * max pivot`, pivots being `L_kk^2`.
pub fn checked_cholesky(m: DMatrix<f64>, tol: f64) -> Result<Cholesky<f64, Dyn>> {
    let chol = Cholesky::new(m).ok_or(Error::SingularScatter { pivot_ratio: 0.0 })?;
    let ratio = pivot_ratio(&chol);
    if !(ratio >= tol) {
        return Err(Error::SingularScatter { pivot_ratio: ratio });
    }
    Ok(chol)
}

fn pivot_ratio(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for k in 0..l.nrows() {
        let p = l[(k, k)] * l[(k, k)];
        lo = lo.min(p);
        hi = hi.max(p);
    }
    if hi > 0.0 {
        lo / hi
    } else {
        0.0
    }
}

/// Inverse of an SPD matrix via its Cholesky factor, symmetrized.
pub fn spd_inverse(m: DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let mut inv = checked_cholesky(m, tol)?.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let k = m.nrows();
    for i in 0..k {
        for j in (i + 1)..k {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `max |(a b - I)_ij|`.
pub fn identity_residual(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let prod = a * b;
    let mut worst = 0.0_f64;
    for j in 0..prod.ncols() {
        for i in 0..prod.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - target).abs());
        }
    }
    worst
}

/// Residual of a single row of `a b - I`, `O(k^2)`.
pub fn identity_residual_row(a: &DMatrix<f64>, b: &DMatrix<f64>, row: usize) -> f64 {
    let k = a.nrows();
    let mut worst = 0.0_f64;
    for j in 0..k {
        let mut acc = 0.0;
        for m in 0..k {
            acc += a[(row, m)] * b[(m, j)];
        }
        let target = if row == j { 1.0 } else { 0.0 };
        worst = worst.max((acc - target).abs());
    }
    worst
}

/// Copy of `m` without row and column `idx`.
pub fn remove_row_col(m: &DMatrix<f64>, idx: usize) -> DMatrix<f64> {
    m.clone().remove_row(idx).remove_column(idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_small_spd() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let inv = spd_inverse(m.clone(), 1e-10).unwrap();
        assert!(identity_residual(&m, &inv) < 1e-15);
        assert!(identity_residual_row(&m, &inv, 1) < 1e-15);
    }

    #[test]
    fn rank_deficient_is_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            checked_cholesky(m, 1e-10),
            Err(Error::SingularScatter { .. })
        ));
    }

    #[test]
    fn tiny_relative_pivot_is_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-13]);
        assert!(checked_cholesky(m.clone(), 1e-10).is_err());
        assert!(checked_cholesky(m, 1e-14).is_ok());
    }

    #[test]
    fn zero_matrix_is_singular() {
        assert!(checked_cholesky(DMatrix::zeros(1, 1), 1e-10).is_err());
    }

    #[test]
    fn remove_middle_row_col() {
        let m = DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        let r = remove_row_col(&m, 1);
        assert_eq!(r, DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 6.0, 8.0]));
    }
}
