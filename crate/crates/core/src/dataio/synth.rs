use rand::Rng;
use rand_distr::StandardNormal;

use super::{FeatureSet, Record};
use crate::error::{Error, Result};
use crate::rng;

/// Gaussian blobs around uniformly drawn class centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    /// Per-component standard deviation around the class center.
    pub cluster_spread: f64,
    pub seed: u64,
}

/// Draws every class center from `[0, 1)^dim`, then, class by class,
/// `samples_per_class` points `center + spread * N(0, 1)` per component.
/// Records come out grouped by class, labels `0..num_classes`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<FeatureSet> {
    if spec.num_classes == 0 || spec.dim == 0 || spec.samples_per_class == 0 {
        return Err(Error::Contract(format!(
            "synthetic spec has a zero count: {spec:?}"
        )));
    }
    if !(spec.cluster_spread >= 0.0 && spec.cluster_spread.is_finite()) {
        return Err(Error::Contract(format!(
            "cluster spread {} must be finite and nonnegative",
            spec.cluster_spread
        )));
    }
    let mut rng = rng::seeded(spec.seed);
    let centers: Vec<Vec<f64>> = (0..spec.num_classes)
        .map(|_| (0..spec.dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut records = Vec::with_capacity(spec.num_classes * spec.samples_per_class);
    for (label, center) in centers.iter().enumerate() {
        for _ in 0..spec.samples_per_class {
            let vector = center
                .iter()
                .map(|&c| {
                    let z: f64 = rng.sample(StandardNormal);
                    (c + spec.cluster_spread * z) as f32
                })
                .collect();
            records.push(Record {
                label: label as u32,
                vector,
            });
        }
    }
    FeatureSet::new(spec.dim, records)
}

impl FeatureSet {
    /// First `per_class` records of every label go to the first set, the rest
    /// to the second; record order is kept.
    pub fn split_per_class(&self, per_class: usize) -> (FeatureSet, FeatureSet) {
        let mut seen = std::collections::HashMap::new();
        let (mut head, mut tail) = (Vec::new(), Vec::new());
        for r in self.records() {
            let n = seen.entry(r.label).or_insert(0usize);
            if *n < per_class {
                head.push(r.clone());
            } else {
                tail.push(r.clone());
            }
            *n += 1;
        }
        let dim = self.dim();
        (
            FeatureSet { dim, records: head },
            FeatureSet { dim, records: tail },
        )
    }
}
