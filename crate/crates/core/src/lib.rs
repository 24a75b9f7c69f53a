//! Incremental classifier built from product-quantizing self-organizing maps
//! feeding a sparse associative memory.
//!
//! A feature vector of dimension `k * d` is split into `k` contiguous
//! subvectors; each is quantized by its own SOM to the index of its
//! best-matching unit, giving a [`SparseCode`] with one active neuron per map.
//! The [`AssociativeClassifier`] stores, per class, which neurons its training
//! samples activated, and classifies by counting matches.
//!
//! ```
//! use somsam::{AssociativeClassifier, Mode, SparseCode};
//!
//! let mut clf = AssociativeClassifier::new(Mode::Binary, 2, 4).unwrap();
//! clf.learn(&SparseCode::new(4, vec![1, 3]).unwrap(), 0).unwrap();
//! clf.learn(&SparseCode::new(4, vec![2, 0]).unwrap(), 1).unwrap();
//! assert_eq!(clf.predict(&SparseCode::new(4, vec![2, 3]).unwrap()).unwrap(), 0);
//! assert_eq!(clf.predict(&SparseCode::new(4, vec![2, 0]).unwrap()).unwrap(), 1);
//! ```

pub mod dataio;
pub mod error;
pub mod harness;
pub mod knn;
pub mod pq;
pub mod rng;
pub mod sam;
pub mod som;

pub use dataio::{FeatureSet, Model, Record};
pub use error::{Error, FormatKind, Result};
pub use pq::{ProductQuantizer, SparseCode};
pub use sam::{AssociativeClassifier, Mode};
pub use som::{Decay, GridTopology, Som, SomTrainConfig};
