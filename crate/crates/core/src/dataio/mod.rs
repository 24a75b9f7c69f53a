//! Feature files, normalization, synthetic data and model persistence.

mod fvb;
mod model;
mod synth;

pub use fvb::{
    read_features, read_features_file, write_features, write_features_file, FVB_MAGIC, FVB_VERSION,
};
pub use model::{
    load_model, load_model_file, save_model, save_model_file, Model, MODEL_MAGIC, MODEL_VERSION,
};
pub use synth::{generate_synthetic, SyntheticSpec};

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// One labeled feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub label: u32,
    pub vector: Vec<f32>,
}

/// Labeled feature vectors sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    records: Vec<Record>,
}

impl FeatureSet {
    pub fn new(dim: usize, records: Vec<Record>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Contract(
                "feature dimension must be at least 1".into(),
            ));
        }
        for (index, r) in records.iter().enumerate() {
            if r.vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: r.vector.len(),
                });
            }
            if r.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteSample { index });
            }
        }
        Ok(FeatureSet { dim, records })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn vectors(&self) -> Vec<&[f32]> {
        self.records.iter().map(|r| r.vector.as_slice()).collect()
    }

    /// Distinct labels, ascending.
    pub fn labels(&self) -> Vec<u32> {
        self.records
            .iter()
            .map(|r| r.label)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Records whose label passes `keep`, in order.
    pub fn filter_labels(&self, keep: impl Fn(u32) -> bool) -> FeatureSet {
        FeatureSet {
            dim: self.dim,
            records: self
                .records
                .iter()
                .filter(|r| keep(r.label))
                .cloned()
                .collect(),
        }
    }

    /// Scales every nonzero vector to unit L2 norm. Returns the normalized
    /// set and the number of all-zero vectors left as they were.
    pub fn l2_normalize(&self) -> (FeatureSet, usize) {
        let mut skipped = 0;
        let records = self
            .records
            .iter()
            .map(|r| {
                let norm = r
                    .vector
                    .iter()
                    .map(|&v| (v as f64) * (v as f64))
                    .sum::<f64>()
                    .sqrt();
                if norm == 0.0 {
                    skipped += 1;
                    return r.clone();
                }
                Record {
                    label: r.label,
                    vector: r.vector.iter().map(|&v| (v as f64 / norm) as f32).collect(),
                }
            })
            .collect();
        (
            FeatureSet {
                dim: self.dim,
                records,
            },
            skipped,
        )
    }
}
