#![allow(dead_code)]

use nalgebra::DMatrix;
use pfst_core::scatter::trace_criterion_direct;
use pfst_core::{Dataset, DEFAULT_SINGULAR_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Gaussian classes with random mean shifts and a random mixing of columns, so
/// features are correlated but (almost surely) not collinear.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, p: usize, classes: usize) -> Dataset {
    let shifts = DMatrix::from_fn(classes, p, |_, _| normal(rng));
    let mix = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.3 * normal(rng) });
    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    for i in (1..n).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    let raw = DMatrix::from_fn(n, p, |r, j| shifts[(labels[r], j)] + normal(rng));
    let x = raw * mix;
    let names = (0..p).map(|j| format!("f{j}")).collect();
    let class_names = (0..classes).map(|c| format!("c{c}")).collect();
    Dataset::new(x, labels, names, class_names).unwrap()
}

/// Brute-force criterion on a subset, straight from the scatter definitions.
pub fn direct(data: &Dataset, subset: &[usize]) -> f64 {
    trace_criterion_direct(data, subset, DEFAULT_SINGULAR_TOL).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(a.abs()).max(1e-300)
}

/// `|a - b| <= tol * (1 + |b|)`; relative for large values, absolute near zero.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

/// Two classes {0, 2} and {4, 6} on feature 0 (t = 4) plus extra noise columns.
pub fn dominant_instance(extra: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let base = [0.0, 2.0, 4.0, 6.0];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for rep in 0..10 {
        for (k, &v) in base.iter().enumerate() {
            let mut row = vec![v + 0.01 * rep as f64];
            for _ in 0..extra {
                row.push(normal(&mut r));
            }
            rows.push(row);
            labels.push(usize::from(k >= 2));
        }
    }
    Dataset::from_rows(&rows, labels).unwrap()
}

/// Dataset from column vectors.
pub fn from_columns(cols: &[Vec<f64>], labels: Vec<usize>) -> Dataset {
    let n = labels.len();
    let rows: Vec<Vec<f64>> = (0..n).map(|r| cols.iter().map(|c| c[r]).collect()).collect();
    Dataset::from_rows(&rows, labels).unwrap()
}

/// Balanced two-class labels with a random order.
pub fn two_class_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    for i in (1..n).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    labels
}

/// Independent features, each carrying its own class shift.
pub fn independent_informative(rng: &mut ChaCha8Rng, n: usize, shifts: &[f64]) -> Dataset {
    let labels = two_class_labels(rng, n);
    let cols: Vec<Vec<f64>> = shifts
        .iter()
        .map(|&s| labels.iter().map(|&y| if y == 1 { s } else { 0.0 } + normal(rng)).collect())
        .collect();
    from_columns(&cols, labels)
}
