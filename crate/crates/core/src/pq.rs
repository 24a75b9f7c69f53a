//! Product quantization with one self-organizing map per subspace.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;
use crate::som::{GridTopology, Som, SomTrainConfig};

/// Splits `x` into `parts` contiguous, equally sized subvectors.
pub fn split(x: &[f32], parts: usize) -> Result<Vec<&[f32]>> {
    if parts == 0 || !x.len().is_multiple_of(parts) || x.is_empty() {
        return Err(Error::Indivisible {
            len: x.len(),
            parts,
        });
    }
    Ok(x.chunks_exact(x.len() / parts).collect())
}

/// Seed for the SOM of subspace `j`.
pub fn som_seed(seed: u64, j: usize) -> u64 {
    rng::derive_seed(seed, j as u64)
}

/// Output of the product quantizer: the active neuron of each SOM.
///
/// Its dense form is a `k * n_per_som` binary vector with ones at
/// `j * n_per_som + indices[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SparseCode {
    n_per_som: usize,
    indices: Vec<u32>,
}

impl SparseCode {
    pub fn new(n_per_som: usize, indices: Vec<u32>) -> Result<Self> {
        if n_per_som == 0 || indices.is_empty() {
            return Err(Error::Contract(
                "sparse code needs k >= 1 and N >= 1".into(),
            ));
        }
        if let Some(j) = indices.iter().position(|&i| i as usize >= n_per_som) {
            return Err(Error::Contract(format!(
                "code index {} of block {j} outside [0, {n_per_som})",
                indices[j]
            )));
        }
        Ok(SparseCode { n_per_som, indices })
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn n_per_som(&self) -> usize {
        self.n_per_som
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    /// Columns of the ones in the dense form, ascending.
    pub fn columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices
            .iter()
            .enumerate()
            .map(move |(j, &i)| j * self.n_per_som + i as usize)
    }

    pub fn to_dense(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.k() * self.n_per_som];
        for c in self.columns() {
            out[c] = 1;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductQuantizer {
    subdim: usize,
    soms: Vec<Som>,
}

impl ProductQuantizer {
    /// Assembles a quantizer from already-built maps, which must agree on
    /// input dimension and neuron count.
    pub fn from_soms(soms: Vec<Som>) -> Result<Self> {
        let first = soms
            .first()
            .ok_or_else(|| Error::Contract("product quantizer needs at least one som".into()))?;
        let (subdim, n) = (first.dim(), first.len());
        for (j, som) in soms.iter().enumerate() {
            if som.dim() != subdim || som.len() != n {
                return Err(Error::Shape(format!(
                    "som {j} is {}x{}, expected {subdim}x{n}",
                    som.len(),
                    som.dim()
                )));
            }
        }
        Ok(ProductQuantizer { subdim, soms })
    }

    /// Trains `k` SOMs on the contiguous subvectors of `data`, each on its
    /// own grid copy and with seed `som_seed(config.seed, j)`.
    pub fn train(
        config: &SomTrainConfig,
        k: usize,
        grid: GridTopology,
        data: &[&[f32]],
    ) -> Result<Self> {
        config.validate()?;
        let first = data
            .first()
            .ok_or(Error::Empty("product quantizer training"))?;
        let subdim = split(first, k)?[0].len();
        for x in data {
            if x.len() != first.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    actual: x.len(),
                });
            }
        }
        let soms = (0..k)
            .into_par_iter()
            .map(|j| {
                let sub: Vec<&[f32]> = data
                    .iter()
                    .map(|x| &x[j * subdim..(j + 1) * subdim])
                    .collect();
                let cfg = SomTrainConfig {
                    seed: som_seed(config.seed, j),
                    ..*config
                };
                let mut som = Som::init(&cfg, subdim, grid, &sub)?;
                som.train(&cfg, &sub)?;
                Ok(som)
            })
            .collect::<Vec<Result<Som>>>()
            .into_iter()
            .enumerate()
            .map(|(j, r)| {
                r.map_err(|e| Error::Som {
                    som: j,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ProductQuantizer::from_soms(soms)
    }

    pub fn k(&self) -> usize {
        self.soms.len()
    }

    pub fn subdim(&self) -> usize {
        self.subdim
    }

    pub fn input_dim(&self) -> usize {
        self.subdim * self.soms.len()
    }

    pub fn n_per_som(&self) -> usize {
        self.soms[0].len()
    }

    pub fn soms(&self) -> &[Som] {
        &self.soms
    }

    pub fn quantize(&self, x: &[f32]) -> Result<SparseCode> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let indices = self
            .soms
            .iter()
            .zip(x.chunks_exact(self.subdim))
            .map(|(som, sub)| som.bmu_unchecked(sub) as u32)
            .collect();
        Ok(SparseCode {
            n_per_som: self.n_per_som(),
            indices,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::som::Decay;
    use proptest::prelude::*;

    fn cfg(seed: u64) -> SomTrainConfig {
        SomTrainConfig {
            epochs: 5,
            alpha: 0.3,
            theta: 1.0,
            decay: Decay::Linear,
            seed,
        }
    }

    fn toy_pq() -> ProductQuantizer {
        let g = GridTopology::new(1, 2).unwrap();
        let som = Som::from_weights(2, g, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        ProductQuantizer::from_soms(vec![som.clone(), som]).unwrap()
    }

    #[test]
    fn split_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let parts = split(&x, 3).unwrap();
        assert_eq!(parts, vec![&[1.0, 2.0][..], &[3.0, 4.0], &[5.0, 6.0]]);
        assert_eq!(split(&x, 1).unwrap(), vec![&x[..]]);
        match split(&[0.0; 10], 3) {
            Err(Error::Indivisible { len, parts }) => assert_eq!((len, parts), (10, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(split(&x, 0).is_err());
    }

    #[test]
    fn quantize_by_inspection() {
        let pq = toy_pq();
        let code = pq.quantize(&[0.9, 0.1, 0.1, 0.9]).unwrap();
        assert_eq!(code.indices(), &[0, 1]);
        assert_eq!(code.to_dense(), vec![1, 0, 0, 1]);
        assert!(matches!(
            pq.quantize(&[0.0; 3]),
            Err(Error::DimensionMismatch {
                expected: 4,
                actual: 3
            })
        ));
    }

    #[test]
    fn exact_weights_give_their_neurons() {
        let pq = toy_pq();
        assert_eq!(
            pq.quantize(&[0.0, 1.0, 1.0, 0.0]).unwrap().indices(),
            &[1, 0]
        );
    }

    #[test]
    fn sparse_code_validation() {
        assert!(SparseCode::new(4, vec![0, 3]).is_ok());
        assert!(SparseCode::new(4, vec![0, 4]).is_err());
        assert!(SparseCode::new(4, vec![]).is_err());
        assert!(SparseCode::new(0, vec![0]).is_err());
    }

    fn blob_data() -> Vec<Vec<f32>> {
        // subspace 0 clusters at (0,0) / (1,1); subspace 1 at (0,1) / (1,0)
        let mut r = rng::seeded(1);
        (0..120)
            .map(|i| {
                let a = (i % 2) as f32;
                let b = ((i / 2) % 2) as f32;
                let mut j = || (rng::index(&mut r, 1001) as f32 / 1000.0 - 0.5) * 0.05;
                vec![a + j(), a + j(), b + j(), 1.0 - b + j()]
            })
            .collect()
    }

    #[test]
    fn soms_land_near_subspace_centroids() {
        let data = blob_data();
        let refs: Vec<&[f32]> = data.iter().map(Vec::as_slice).collect();
        let pq =
            ProductQuantizer::train(&cfg(3), 2, GridTopology::new(1, 2).unwrap(), &refs).unwrap();
        // oracle: per-subspace cluster means from the generating assignment
        for (j, centers) in [[[0.0, 0.0], [1.0, 1.0]], [[0.0, 1.0], [1.0, 0.0]]]
            .iter()
            .enumerate()
        {
            let means: Vec<[f32; 2]> = (0..2)
                .map(|c| {
                    let members: Vec<&Vec<f32>> = data
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| if j == 0 { i % 2 == c } else { (i / 2) % 2 == c })
                        .map(|(_, v)| v)
                        .collect();
                    let n = members.len() as f32;
                    [
                        members.iter().map(|v| v[2 * j]).sum::<f32>() / n,
                        members.iter().map(|v| v[2 * j + 1]).sum::<f32>() / n,
                    ]
                })
                .collect();
            for (c, center) in centers.iter().enumerate() {
                assert!((means[c][0] - center[0]).abs() < 0.05);
                let som = &pq.soms()[j];
                let nearest = (0..2)
                    .map(|i| crate::som::squared_distance(som.weight(i), &means[c]).sqrt())
                    .fold(f32::INFINITY, f32::min);
                assert!(nearest < 0.1, "som {j} cluster {c}: {nearest}");
            }
        }
    }

    #[test]
    fn single_subspace_matches_plain_som() {
        let data = blob_data();
        let refs: Vec<&[f32]> = data.iter().map(Vec::as_slice).collect();
        let g = GridTopology::new(2, 2).unwrap();
        let c = cfg(8);
        let pq = ProductQuantizer::train(&c, 1, g, &refs).unwrap();
        let direct_cfg = SomTrainConfig {
            seed: som_seed(8, 0),
            ..c
        };
        let mut som = Som::init(&direct_cfg, 4, g, &refs).unwrap();
        som.train(&direct_cfg, &refs).unwrap();
        assert_eq!(pq.soms()[0], som);
    }

    #[test]
    fn training_is_deterministic_and_seeded() {
        let data = blob_data();
        let refs: Vec<&[f32]> = data.iter().map(Vec::as_slice).collect();
        let g = GridTopology::new(2, 3).unwrap();
        let a = ProductQuantizer::train(&cfg(1), 2, g, &refs).unwrap();
        let b = ProductQuantizer::train(&cfg(1), 2, g, &refs).unwrap();
        let c = ProductQuantizer::train(&cfg(2), 2, g, &refs).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn training_errors_carry_som_index() {
        let x = [0.0f32, 1.0, 2.0, f32::NAN];
        let err = ProductQuantizer::train(&cfg(1), 2, GridTopology::new(1, 1).unwrap(), &[&x])
            .unwrap_err();
        match err {
            Error::Som { som, source } => {
                assert_eq!(som, 1);
                assert!(matches!(*source, Error::NonFiniteSample { index: 0 }));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            ProductQuantizer::train(&cfg(1), 3, GridTopology::new(1, 1).unwrap(), &[&x]),
            Err(Error::Indivisible { len: 4, parts: 3 })
        ));
        assert!(
            ProductQuantizer::train(&cfg(1), 2, GridTopology::new(1, 1).unwrap(), &[]).is_err()
        );
    }

    #[test]
    fn reachable_cells_cover_the_product_space() {
        // k = 2 maps of N = 3 points on a line; a grid of inputs reaches all 3^2 cells
        let g = GridTopology::new(1, 3).unwrap();
        let som = Som::from_weights(1, g, vec![0.0, 1.0, 2.0]).unwrap();
        let pq = ProductQuantizer::from_soms(vec![som.clone(), som]).unwrap();
        let mut cells = std::collections::HashSet::new();
        for a in 0..=20 {
            for b in 0..=20 {
                let x = [a as f32 / 10.0, b as f32 / 10.0];
                cells.insert(pq.quantize(&x).unwrap());
            }
        }
        assert_eq!(cells.len(), 9);
    }

    proptest! {
        #[test]
        fn codes_are_valid(x in proptest::collection::vec(-2f32..2.0, 4)) {
            let code = toy_pq().quantize(&x).unwrap();
            prop_assert_eq!(code.k(), 2);
            let dense = code.to_dense();
            prop_assert_eq!(dense.iter().filter(|&&b| b == 1).count(), 2);
            for j in 0..2 {
                prop_assert_eq!(dense[j * 2..j * 2 + 2].iter().map(|&b| b as u32).sum::<u32>(), 1);
            }
        }

        #[test]
        fn perturbing_one_subspace_changes_one_index(
            x in proptest::collection::vec(-2f32..2.0, 4),
            delta in proptest::collection::vec(-2f32..2.0, 2),
            j in 0usize..2,
        ) {
            let pq = toy_pq();
            let mut y = x.clone();
            y[2 * j] += delta[0];
            y[2 * j + 1] += delta[1];
            let (a, b) = (pq.quantize(&x).unwrap(), pq.quantize(&y).unwrap());
            prop_assert_eq!(a.indices()[1 - j], b.indices()[1 - j]);
        }
    }
}
