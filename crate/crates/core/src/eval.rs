//! Pooled-covariance LDA and stratified k-fold cross-validation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{validate_subset, Dataset};
use crate::error::{Error, Result};
use crate::linalg::checked_cholesky;

/// Linear discriminant classifier on a fixed feature subset.
#[derive(Debug, Clone)]
pub struct LdaModel {
    subset: Vec<usize>,
    /// `C x |R|`
    means: DMatrix<f64>,
    priors: Vec<f64>,
    /// `Sigma^{-1} mu_k` per class, as columns.
    coef: DMatrix<f64>,
    /// `-1/2 mu_k' Sigma^{-1} mu_k + ln pi_k`
    intercept: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl LdaModel {
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn class_means(&self) -> &DMatrix<f64> {
        &self.means
    }

    /// Pooled covariance Cholesky factor.
    pub fn covariance_factor(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    /// Discriminant score of every class for one row of the full feature table.
    pub fn scores(&self, row: &[f64]) -> DVector<f64> {
        let x = DVector::from_iterator(self.subset.len(), self.subset.iter().map(|&f| row[f]));
        self.coef.tr_mul(&x) + &self.intercept
    }
}

/// Fits LDA with priors `n_i / n` and pooled covariance `S_w / (n - C)`, plus
/// `ridge * I` when positive.
pub fn lda_fit(train: &Dataset, subset: &[usize], ridge: f64, tol: f64) -> Result<LdaModel> {
    validate_subset(subset, train.n_features())?;
    let counts = train.class_counts();
    if let Some(c) = counts.iter().position(|&k| k == 0) {
        return Err(Error::MissingClass(c));
    }
    let n = train.n_rows();
    let c = counts.len();
    if n <= c {
        return Err(Error::SingularScatter { pivot_ratio: 0.0 });
    }
    let k = subset.len();
    let mut means = DMatrix::zeros(c, k);
    for (j, &f) in subset.iter().enumerate() {
        for (&x, &l) in train.column(f).iter().zip(train.labels()) {
            means[(l, j)] += x;
        }
        for i in 0..c {
            means[(i, j)] /= counts[i] as f64;
        }
    }
    let labels = train.labels();
    let centered = DMatrix::from_fn(n, k, |r, j| train.features()[(r, subset[j])] - means[(labels[r], j)]);
    let mut cov = centered.tr_mul(&centered) / (n - c) as f64;
    if ridge > 0.0 {
        for d in 0..k {
            cov[(d, d)] += ridge;
        }
    }
    let chol = checked_cholesky(cov, tol)?;
    let coef = chol.solve(&means.transpose());
    let priors: Vec<f64> = counts.iter().map(|&m| m as f64 / n as f64).collect();
    let intercept = DVector::from_fn(c, |i, _| {
        -0.5 * means.row(i).transpose().dot(&coef.column(i)) + priors[i].ln()
    });
    Ok(LdaModel {
        subset: subset.to_vec(),
        means,
        priors,
        coef,
        intercept,
        chol,
    })
}

/// Predicted class for every row of `rows`; ties go to the lowest class id.
pub fn lda_predict(model: &LdaModel, rows: &DMatrix<f64>) -> Vec<usize> {
    let width = rows.ncols();
    let mut buf = vec![0.0; width];
    (0..rows.nrows())
        .map(|r| {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = rows[(r, j)];
            }
            argmax(&model.scores(&buf))
        })
        .collect()
}

fn argmax(scores: &DVector<f64>) -> usize {
    let mut best = 0;
    for i in 1..scores.len() {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub k: usize,
    pub seed: u64,
    pub fold_errors: Vec<f64>,
    pub mean_error: f64,
}

/// Stratified fold id per row: each class is shuffled with `seed` and dealt
/// round-robin, continuing where the previous class stopped.
pub fn stratified_folds(data: &Dataset, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    let counts = data.class_counts();
    if let Some((class, &count)) = counts.iter().enumerate().find(|(_, &m)| m < k) {
        return Err(Error::Stratification { class, count, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; data.n_rows()];
    let mut next = 0;
    for class in 0..counts.len() {
        let mut rows: Vec<usize> = (0..data.n_rows()).filter(|&r| data.labels()[r] == class).collect();
        rows.shuffle(&mut rng);
        for r in rows {
            fold[r] = next % k;
            next += 1;
        }
    }
    Ok(fold)
}

/// Misclassification rate of LDA on `subset` over `k` stratified folds. The
/// subset is fixed by the caller and not re-selected inside folds.
pub fn kfold_cv(data: &Dataset, subset: &[usize], k: usize, seed: u64, ridge: f64, tol: f64) -> Result<CvResult> {
    validate_subset(subset, data.n_features())?;
    let fold = stratified_folds(data, k, seed)?;
    let fold_errors = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..data.n_rows()).filter(|&r| fold[r] != f).collect();
            let test: Vec<usize> = (0..data.n_rows()).filter(|&r| fold[r] == f).collect();
            let model = lda_fit(&data.select_rows(&train)?, subset, ridge, tol)?;
            let rows = DMatrix::from_fn(test.len(), data.n_features(), |i, j| data.features()[(test[i], j)]);
            let predicted = lda_predict(&model, &rows);
            let wrong = predicted
                .iter()
                .zip(&test)
                .filter(|(p, &r)| **p != data.labels()[r])
                .count();
            Ok(wrong as f64 / test.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean_error = fold_errors.iter().sum::<f64>() / k as f64;
    Ok(CvResult {
        k,
        seed,
        fold_errors,
        mean_error,
    })
}
