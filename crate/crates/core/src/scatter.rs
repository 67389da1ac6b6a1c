//! Direct (non-incremental) scatter matrices and trace criterion.
//!
//! Nothing here forms an explicit inverse; every criterion value comes from
//! Cholesky solves against `S_w`. These routines are the reference the
//! incremental updates are tested against.

use nalgebra::{DMatrix, DVector};

use crate::dataset::{compute_class_stats, validate_subset, ClassStats, Dataset};
use crate::error::{Error, Result};
use crate::linalg::checked_cholesky;

/// `C x |R|` table of class-mean deviations `x̄_i - x̄` restricted to `subset`.
pub fn mean_deviations(stats: &ClassStats, subset: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(stats.n_classes(), subset.len(), |i, j| {
        stats.mean_deviation(i, subset[j])
    })
}

/// `n x |R|` table of observations centered on their own class mean.
pub fn class_centered(data: &Dataset, stats: &ClassStats, subset: &[usize]) -> DMatrix<f64> {
    let labels = data.labels();
    DMatrix::from_fn(data.n_rows(), subset.len(), |r, j| {
        let f = subset[j];
        data.features()[(r, f)] - stats.class_means[(labels[r], f)]
    })
}

/// Between-class scatter `S_b = sum_i n_i (x̄_i - x̄)(x̄_i - x̄)'` on `subset`.
pub fn between_scatter(stats: &ClassStats, subset: &[usize]) -> DMatrix<f64> {
    let devs = mean_deviations(stats, subset);
    let weights = DMatrix::from_diagonal(&DVector::from_iterator(
        stats.n_classes(),
        stats.counts.iter().map(|&c| c as f64),
    ));
    devs.transpose() * weights * devs
}

/// Within-class scatter `S_w = sum_i sum_j (x_ij - x̄_i)(x_ij - x̄_i)'` on `subset`.
pub fn within_scatter(data: &Dataset, stats: &ClassStats, subset: &[usize]) -> DMatrix<f64> {
    let z = class_centered(data, stats, subset);
    z.tr_mul(&z)
}

/// `trace(S_w^{-1} S_b)` by solving `|R|` systems against `S_w`.
pub fn trace_criterion_direct(data: &Dataset, subset: &[usize], tol: f64) -> Result<f64> {
    validate_subset(subset, data.n_features())?;
    let stats = compute_class_stats(data)?;
    let sb = between_scatter(&stats, subset);
    let sw = within_scatter(data, &stats, subset);
    let chol = checked_cholesky(sw, tol)?;
    Ok(chol.solve(&sb).trace().max(0.0))
}

/// The same criterion as a count-weighted sum of squared Mahalanobis distances
/// `sum_i n_i (x̄_i - x̄)' S_w^{-1} (x̄_i - x̄)`.
pub fn trace_criterion_mahalanobis(
    data: &Dataset,
    stats: &ClassStats,
    subset: &[usize],
    tol: f64,
) -> Result<f64> {
    validate_subset(subset, data.n_features())?;
    let sw = within_scatter(data, stats, subset);
    let chol = checked_cholesky(sw, tol)?;
    let devs = mean_deviations(stats, subset);
    let mut t = 0.0;
    for i in 0..stats.n_classes() {
        let d = devs.row(i).transpose();
        let solved = chol.solve(&d);
        t += stats.counts[i] as f64 * d.dot(&solved);
    }
    Ok(t)
}

/// Single-feature criterion: between-class over within-class sum of squares, `O(n)`.
pub fn single_feature_trace(data: &Dataset, stats: &ClassStats, f: usize, tol: f64) -> Result<f64> {
    if f >= data.n_features() {
        return Err(Error::InvalidConfig(format!("feature index {f} out of range")));
    }
    let col = data.column(f);
    let mut within = 0.0;
    let mut total = 0.0;
    let overall = stats.overall_mean[f];
    for (&x, &l) in col.iter().zip(data.labels()) {
        let d = x - stats.class_means[(l, f)];
        within += d * d;
        total += (x - overall) * (x - overall);
    }
    if !(within > tol * total) || within == 0.0 {
        return Err(Error::SingularScatter {
            pivot_ratio: if total > 0.0 { within / total } else { 0.0 },
        });
    }
    let between: f64 = (0..stats.n_classes())
        .map(|i| {
            let d = stats.mean_deviation(i, f);
            stats.counts[i] as f64 * d * d
        })
        .sum();
    Ok(between / within)
}

/// Residual sum of squares of the least-squares regression of `response` on `design`.
///
/// Used only to contrast the trace criterion with a measure that can never get
/// worse when columns are appended.
pub fn ols_sse(design: &DMatrix<f64>, response: &DVector<f64>, tol: f64) -> Result<f64> {
    let (n, k) = design.shape();
    if response.len() != n || k == 0 || k > n {
        return Err(Error::RankDeficient);
    }
    let qr = design.clone().qr();
    let r = qr.r();
    let diag_max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| !(r[(i, i)].abs() > tol * diag_max)) {
        return Err(Error::RankDeficient);
    }
    let qty = qr.q().tr_mul(response);
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient)?;
    let resid = response - design * beta;
    Ok(resid.norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DEFAULT_SINGULAR_TOL as TOL;

    fn line() -> Dataset {
        Dataset::from_rows(&[vec![0.0], vec![2.0], vec![4.0], vec![6.0]], vec![0, 0, 1, 1]).unwrap()
    }

    #[test]
    fn scatter_of_small_instance() {
        let data = line();
        let stats = compute_class_stats(&data).unwrap();
        assert_eq!(between_scatter(&stats, &[0])[(0, 0)], 16.0);
        assert_eq!(within_scatter(&data, &stats, &[0])[(0, 0)], 4.0);
        assert_eq!(trace_criterion_direct(&data, &[0], TOL).unwrap(), 4.0);
        assert_eq!(trace_criterion_mahalanobis(&data, &stats, &[0], TOL).unwrap(), 4.0);
        assert_eq!(single_feature_trace(&data, &stats, 0, TOL).unwrap(), 4.0);
    }

    #[test]
    fn one_class_has_zero_between_scatter() {
        let rows = vec![vec![1.0, 2.0], vec![0.5, -1.0], vec![3.0, 0.0]];
        let data = Dataset::from_rows(&rows, vec![0, 0, 0]).unwrap();
        let stats = compute_class_stats(&data).unwrap();
        assert!(between_scatter(&stats, &[0, 1]).iter().all(|v| v.abs() < 1e-15));
        assert!(trace_criterion_mahalanobis(&data, &stats, &[0, 1], TOL).unwrap().abs() < 1e-15);
    }

    #[test]
    fn identical_means_give_zero_criterion() {
        // class 0 spread 1, class 1 spread 3, both centered at 0
        let rows = vec![vec![-1.0], vec![1.0], vec![-3.0], vec![3.0]];
        let data = Dataset::from_rows(&rows, vec![0, 0, 1, 1]).unwrap();
        let stats = compute_class_stats(&data).unwrap();
        assert_eq!(between_scatter(&stats, &[0])[(0, 0)], 0.0);
        assert_eq!(trace_criterion_direct(&data, &[0], TOL).unwrap(), 0.0);
        assert!(single_feature_trace(&data, &stats, 0, TOL).unwrap() < 1e-15);
    }

    #[test]
    fn constant_classes_have_zero_within_scatter() {
        let rows = vec![vec![1.0, 5.0], vec![1.0, 5.0], vec![2.0, -1.0], vec![2.0, -1.0]];
        let data = Dataset::from_rows(&rows, vec![0, 0, 1, 1]).unwrap();
        let stats = compute_class_stats(&data).unwrap();
        assert!(within_scatter(&data, &stats, &[0, 1]).iter().all(|&v| v == 0.0));
        assert!(matches!(
            single_feature_trace(&data, &stats, 0, TOL),
            Err(Error::SingularScatter { .. })
        ));
        assert!(matches!(
            trace_criterion_direct(&data, &[0, 1], TOL),
            Err(Error::SingularScatter { .. })
        ));
    }

    #[test]
    fn duplicated_column_is_rank_deficient() {
        let rows = vec![vec![0.3, 0.3], vec![1.1, 1.1], vec![2.0, 2.0], vec![2.4, 2.4], vec![5.0, 5.0]];
        let data = Dataset::from_rows(&rows, vec![0, 0, 1, 1, 1]).unwrap();
        let stats = compute_class_stats(&data).unwrap();
        let sw = within_scatter(&data, &stats, &[0, 1]);
        assert!(sw.clone().determinant().abs() < 1e-12 * sw[(0, 0)].powi(2));
        assert!(matches!(
            trace_criterion_direct(&data, &[0, 1], TOL),
            Err(Error::SingularScatter { .. })
        ));
    }

    #[test]
    fn ols_exact_fit_and_intercept_only() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        assert!(ols_sse(&x, &y, TOL).unwrap() < 1e-20);

        let ones = DMatrix::from_element(4, 1, 1.0);
        let y = DVector::from_vec(vec![1.0, 2.0, 6.0, 3.0]);
        let mean = 3.0;
        let expected: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
        assert!((ols_sse(&ones, &y, TOL).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ols_rank_deficient_design() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let y = DVector::from_vec(vec![1.0, 0.0, 1.0]);
        assert!(matches!(ols_sse(&x, &y, TOL), Err(Error::RankDeficient)));
    }
}
