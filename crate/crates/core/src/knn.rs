//! Exact brute-force k-nearest-neighbor baseline under cosine similarity.

use std::cmp::Ordering;

use crate::dataio::FeatureSet;
use crate::error::{Error, Result};

pub struct KnnClassifier<'a> {
    train: &'a FeatureSet,
    norms: Vec<f64>,
    classes: Vec<u32>,
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn cosine(a: &[f32], na: f64, b: &[f32], nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

impl<'a> KnnClassifier<'a> {
    pub fn new(train: &'a FeatureSet) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("k-NN training set"));
        }
        let norms = train
            .records()
            .iter()
            .map(|r| dot(&r.vector, &r.vector).sqrt())
            .collect();
        Ok(KnnClassifier {
            train,
            norms,
            classes: train.labels(),
        })
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    /// Every training class, best first.
    ///
    /// Classes are ordered by their vote count among the `knn_k` most similar
    /// training points, then by the similarity of their closest training
    /// point, then by ascending label. Neighbors with equal similarity are
    /// taken in training-set order.
    pub fn rank_classes(&self, x: &[f32], knn_k: usize) -> Result<Vec<u32>> {
        if knn_k == 0 || knn_k > self.train.len() {
            return Err(Error::Contract(format!(
                "knn-k = {knn_k} with {} training points",
                self.train.len()
            )));
        }
        if x.len() != self.train.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.train.dim(),
                actual: x.len(),
            });
        }
        let nx = dot(x, x).sqrt();
        let mut sims: Vec<(usize, f64)> = self
            .train
            .records()
            .iter()
            .zip(&self.norms)
            .map(|(r, &nr)| cosine(x, nx, &r.vector, nr))
            .enumerate()
            .collect();
        let by_similarity = |a: &(usize, f64), b: &(usize, f64)| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then(a.0.cmp(&b.0))
        };
        if knn_k < sims.len() {
            sims.select_nth_unstable_by(knn_k - 1, by_similarity);
        }

        // (label, votes, best similarity)
        let mut stats: Vec<(u32, usize, f64)> = self
            .classes
            .iter()
            .map(|&c| (c, 0, f64::NEG_INFINITY))
            .collect();
        let slot = |label: u32| self.classes.binary_search(&label).unwrap();
        for &(i, _) in &sims[..knn_k] {
            stats[slot(self.train.records()[i].label)].1 += 1;
        }
        for &(i, s) in &sims {
            let entry = &mut stats[slot(self.train.records()[i].label)];
            if s > entry.2 {
                entry.2 = s;
            }
        }
        stats.sort_by(|a, b| {
            b.1.cmp(&a.1)
                .then(b.2.partial_cmp(&a.2).unwrap_or(Ordering::Equal))
                .then(a.0.cmp(&b.0))
        });
        Ok(stats.into_iter().map(|(c, _, _)| c).collect())
    }

    pub fn predict(&self, x: &[f32], knn_k: usize) -> Result<u32> {
        Ok(self.rank_classes(x, knn_k)?[0])
    }
}
