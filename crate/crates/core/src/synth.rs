//! Seeded Gaussian class blobs with planted informative, redundant and noise features.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    pub classes: usize,
    pub informative: usize,
    /// Noisy linear combinations of two informative features.
    pub redundant: usize,
    /// RMS distance of class means from the grand mean, in noise standard deviations.
    pub separation: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 1000,
            p: 500,
            classes: 2,
            informative: 5,
            redundant: 0,
            separation: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub data: Dataset,
    pub informative: Vec<usize>,
    pub redundant: Vec<usize>,
}

impl Synthetic {
    /// How many planted informative features appear in `selected`.
    pub fn recall(&self, selected: &[usize]) -> usize {
        self.informative.iter().filter(|f| selected.contains(f)).count()
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<Synthetic> {
    if spec.classes < 2 || spec.n < 2 * spec.classes {
        return Err(Error::InvalidConfig("need at least 2 classes with 2 rows each".into()));
    }
    if spec.informative == 0 || spec.informative + spec.redundant > spec.p {
        return Err(Error::InvalidConfig(format!(
            "cannot plant {} informative and {} redundant features among {}",
            spec.informative, spec.redundant, spec.p
        )));
    }
    if spec.redundant > 0 && spec.informative < 2 {
        return Err(Error::InvalidConfig("redundant features need two informative ones".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };

    let mut order: Vec<usize> = (0..spec.p).collect();
    order.shuffle(&mut rng);
    let informative = order[..spec.informative].to_vec();
    let redundant = order[spec.informative..spec.informative + spec.redundant].to_vec();

    let mut labels: Vec<usize> = (0..spec.n).map(|i| i % spec.classes).collect();
    labels.shuffle(&mut rng);

    let mut x = DMatrix::zeros(spec.n, spec.p);
    for v in x.iter_mut() {
        *v = normal(&mut rng);
    }
    for &f in &informative {
        let mut means: Vec<f64> = (0..spec.classes).map(|_| normal(&mut rng)).collect();
        let centre = means.iter().sum::<f64>() / spec.classes as f64;
        means.iter_mut().for_each(|m| *m -= centre);
        let rms = (means.iter().map(|m| m * m).sum::<f64>() / spec.classes as f64).sqrt();
        for r in 0..spec.n {
            x[(r, f)] += spec.separation * means[labels[r]] / rms;
        }
    }
    for &f in &redundant {
        let pair = rand::seq::index::sample(&mut rng, informative.len(), 2);
        let (a, b) = (informative[pair.index(0)], informative[pair.index(1)]);
        let (wa, wb) = (0.5 + normal(&mut rng).abs(), 0.5 + normal(&mut rng).abs());
        for r in 0..spec.n {
            x[(r, f)] = wa * x[(r, a)] + wb * x[(r, b)] + 0.1 * x[(r, f)];
        }
    }

    let names = (0..spec.p).map(|j| format!("x{j}")).collect();
    let class_names = (0..spec.classes).map(|c| format!("c{c}")).collect();
    let data = Dataset::new(x, labels, names, class_names)?;
    Ok(Synthetic {
        data,
        informative,
        redundant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_ground_truth() {
        let spec = SyntheticSpec {
            n: 90,
            p: 20,
            classes: 3,
            informative: 4,
            redundant: 2,
            ..Default::default()
        };
        let s = generate(&spec).unwrap();
        assert_eq!((s.data.n_rows(), s.data.n_features(), s.data.n_classes()), (90, 20, 3));
        assert_eq!(s.data.class_counts(), vec![30, 30, 30]);
        assert_eq!(s.informative.len(), 4);
        assert!(s.redundant.iter().all(|f| !s.informative.contains(f)));
        assert_eq!(s.recall(&s.informative), 4);
    }

    #[test]
    fn seeded() {
        let spec = SyntheticSpec {
            n: 40,
            p: 10,
            ..Default::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.data, b.data);
        let c = generate(&SyntheticSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn rejects_impossible_plans() {
        let spec = SyntheticSpec {
            p: 3,
            informative: 4,
            ..Default::default()
        };
        assert!(generate(&spec).is_err());
    }
}
