//! Observation table, class statistics and feature subsets.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Immutable `n x p` observation table with dense class labels `0..C`.
///
/// Features are stored column-major so a single feature column is a contiguous
/// slice of length `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, checking shapes, finiteness and that labels index `class_names`.
    pub fn new(
        features: DMatrix<f64>,
        labels: Vec<usize>,
        names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let (n, p) = features.shape();
        if n == 0 || p == 0 {
            return Err(Error::EmptyDataset);
        }
        if labels.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {n} observations",
                labels.len()
            )));
        }
        if names.len() != p {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {p} columns",
                names.len()
            )));
        }
        if class_names.is_empty() {
            return Err(Error::InvalidDataset("no classes".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidDataset(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        if let Some(idx) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value at row {}, column {}",
                idx % n,
                idx / n
            )));
        }
        Ok(Self {
            features,
            labels,
            class_names,
            names,
        })
    }

    /// Convenience constructor with generated names (`f0, f1, ...`) and `C = max(label) + 1`.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidDataset("ragged rows".into()));
        }
        let features = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        let names = (0..p).map(|j| format!("f{j}")).collect();
        let class_names = (0..n_classes).map(|c| c.to_string()).collect();
        Self::new(features, labels, names, class_names)
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n_rows();
        &self.features.as_slice()[j * n..(j + 1) * n]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Dataset restricted to the given rows, keeping the full class list.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let p = self.n_features();
        let features = DMatrix::from_fn(rows.len(), p, |i, j| self.features[(rows[i], j)]);
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        Self::new(features, labels, self.names.clone(), self.class_names.clone())
    }

    /// Same labels and names with a replaced feature table of identical shape.
    pub fn with_features(&self, features: DMatrix<f64>) -> Result<Self> {
        if features.shape() != self.features.shape() {
            return Err(Error::InvalidDataset("feature table shape changed".into()));
        }
        Self::new(
            features,
            self.labels.clone(),
            self.names.clone(),
            self.class_names.clone(),
        )
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Per-class counts and means plus the overall mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub counts: Vec<usize>,
    /// `C x p`, row `i` is the mean of class `i`.
    pub class_means: DMatrix<f64>,
    pub overall_mean: DVector<f64>,
}

impl ClassStats {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn n_total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `x̄_i[f] - x̄[f]`.
    pub fn mean_deviation(&self, class: usize, feature: usize) -> f64 {
        self.class_means[(class, feature)] - self.overall_mean[feature]
    }
}

/// Computes class counts and arithmetic means. Every class needs at least two observations.
pub fn compute_class_stats(data: &Dataset) -> Result<ClassStats> {
    let counts = data.class_counts();
    if let Some((class, &count)) = counts.iter().enumerate().find(|(_, &c)| c < 2) {
        return Err(Error::InvalidDataset(format!(
            "class {class} ({}) has {count} observations; at least 2 required",
            data.class_names()[class]
        )));
    }
    let (n, p) = (data.n_rows(), data.n_features());
    let c = counts.len();
    let mut class_means = DMatrix::zeros(c, p);
    let mut overall_mean = DVector::zeros(p);
    for j in 0..p {
        let col = data.column(j);
        let mut sums = vec![0.0; c];
        for (&x, &l) in col.iter().zip(data.labels()) {
            sums[l] += x;
        }
        for i in 0..c {
            class_means[(i, j)] = sums[i] / counts[i] as f64;
        }
        overall_mean[j] = sums.iter().sum::<f64>() / n as f64;
    }
    Ok(ClassStats {
        counts,
        class_means,
        overall_mean,
    })
}

/// Ordered list of distinct column indices, in selection order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureSubset(Vec<usize>);

impl FeatureSubset {
    pub fn new(indices: Vec<usize>, n_features: usize) -> Result<Self> {
        validate_subset(&indices, n_features)?;
        Ok(Self(indices))
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl Deref for FeatureSubset {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

pub(crate) fn validate_subset(indices: &[usize], n_features: usize) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::InvalidConfig("feature subset is empty".into()));
    }
    let mut seen = vec![false; n_features];
    for &j in indices {
        if j >= n_features {
            return Err(Error::InvalidConfig(format!(
                "feature index {j} out of range for {n_features} features"
            )));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidConfig(format!("duplicate feature index {j}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class_line() -> Dataset {
        Dataset::from_rows(&[vec![0.0], vec![2.0], vec![4.0], vec![6.0]], vec![0, 0, 1, 1]).unwrap()
    }

    #[test]
    fn class_means_of_small_instance() {
        let stats = compute_class_stats(&two_class_line()).unwrap();
        assert_eq!(stats.counts, vec![2, 2]);
        assert_eq!(stats.class_means[(0, 0)], 1.0);
        assert_eq!(stats.class_means[(1, 0)], 5.0);
        assert_eq!(stats.overall_mean[0], 3.0);
    }

    #[test]
    fn single_class_means_equal_overall() {
        let rows = vec![vec![1.0, -2.0], vec![3.5, 0.25], vec![-7.0, 9.0]];
        let data = Dataset::from_rows(&rows, vec![0, 0, 0]).unwrap();
        let stats = compute_class_stats(&data).unwrap();
        for j in 0..2 {
            assert!((stats.class_means[(0, j)] - stats.overall_mean[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn overall_mean_is_count_weighted_class_mean() {
        let rows: Vec<Vec<f64>> = (0..11).map(|i| vec![(i * i) as f64 * 0.37, (i as f64).sin()]).collect();
        let labels = vec![0, 1, 2, 0, 1, 2, 2, 2, 1, 0, 0];
        let data = Dataset::from_rows(&rows, labels).unwrap();
        let stats = compute_class_stats(&data).unwrap();
        assert_eq!(stats.n_total(), 11);
        for j in 0..2 {
            let weighted: f64 = (0..3)
                .map(|i| stats.counts[i] as f64 * stats.class_means[(i, j)])
                .sum::<f64>()
                / 11.0;
            let m = stats.overall_mean[j];
            assert!((weighted - m).abs() <= 1e-12 * m.abs().max(1.0));
        }
    }

    #[test]
    fn class_with_one_observation_is_rejected() {
        let data = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], vec![0, 0, 1]).unwrap();
        assert!(matches!(compute_class_stats(&data), Err(Error::InvalidDataset(_))));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let err = Dataset::from_rows(&[vec![0.0], vec![f64::NAN]], vec![0, 1]).unwrap_err();
        assert!(matches!(err, Error::InvalidDataset(_)));
    }

    #[test]
    fn subset_validation() {
        assert!(FeatureSubset::new(vec![2, 0], 3).is_ok());
        assert!(FeatureSubset::new(vec![], 3).is_err());
        assert!(FeatureSubset::new(vec![0, 0], 3).is_err());
        assert!(FeatureSubset::new(vec![3], 3).is_err());
    }

    #[test]
    fn select_rows_keeps_class_list() {
        let data = two_class_line();
        let sub = data.select_rows(&[0, 1]).unwrap();
        assert_eq!(sub.n_classes(), 2);
        assert_eq!(sub.class_counts(), vec![2, 0]);
        assert_eq!(sub.column(0), &[0.0, 2.0]);
    }
}
