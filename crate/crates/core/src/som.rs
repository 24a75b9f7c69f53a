//! Self-organizing map on a rectangular grid.
//!
//! Inference is a Winner-Takes-All over neurons: the best-matching unit (BMU)
//! is the neuron whose weight vector is nearest the input in squared
//! Euclidean distance, lowest index on ties. Training is online Kohonen:
//! every sample pulls each weight `w_i` toward it by the factor
//! `alpha * T(t) * exp(-d(i*, i)^2 / (2 (theta * T(t))^2))`, where `d` is the
//! grid distance to the BMU `i*` and `T` is the epoch decay.

use crate::error::{Error, Result};
use crate::rng;

/// Stream id for the per-epoch shuffles, distinct from initialization.
const SHUFFLE_STREAM: u64 = 1;

/// `rows x cols` neurons, row-major: neuron `i` sits at `(i / cols, i % cols)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridTopology {
    rows: usize,
    cols: usize,
}

impl GridTopology {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Contract(format!(
                "grid {rows}x{cols} has no neurons"
            )));
        }
        Ok(GridTopology { rows, cols })
    }

    /// Near-square grid for `n` neurons: `rows` is the largest divisor of `n`
    /// not exceeding `sqrt(n)`.
    pub fn near_square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Contract("grid with zero neurons".into()));
        }
        let rows = (1..=n)
            .take_while(|q| q * q <= n)
            .filter(|q| n.is_multiple_of(*q))
            .last()
            .unwrap_or(1);
        GridTopology::new(rows, n / rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coords(&self, i: usize) -> Result<(usize, usize)> {
        if i >= self.len() {
            return Err(Error::Contract(format!(
                "neuron {i} outside a grid of {} neurons",
                self.len()
            )));
        }
        Ok((i / self.cols, i % self.cols))
    }

    /// Euclidean distance between the grid cells of neurons `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> Result<f64> {
        Ok(self.distance_sq(i, j)?.sqrt())
    }

    fn distance_sq(&self, i: usize, j: usize) -> Result<f64> {
        let (ri, ci) = self.coords(i)?;
        let (rj, cj) = self.coords(j)?;
        let dr = ri.abs_diff(rj) as f64;
        let dc = ci.abs_diff(cj) as f64;
        Ok(dr * dr + dc * dc)
    }
}

/// Shape of the epoch decay `T(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decay {
    /// `1 - t/E`
    Linear,
    /// `exp(-t/E)`
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SomTrainConfig {
    pub epochs: u32,
    pub alpha: f64,
    pub theta: f64,
    pub decay: Decay,
    pub seed: u64,
}

impl SomTrainConfig {
    pub const DEFAULT_ALPHA: f64 = 0.1;
    pub const DEFAULT_EPOCHS: u32 = 10;

    /// Defaults for a given grid: `alpha = 0.1`, `theta = max(rows, cols) / 2`,
    /// linear decay.
    pub fn defaults_for(grid: &GridTopology, seed: u64) -> Self {
        SomTrainConfig {
            epochs: Self::DEFAULT_EPOCHS,
            alpha: Self::DEFAULT_ALPHA,
            theta: grid.rows.max(grid.cols) as f64 / 2.0,
            decay: Decay::Linear,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Contract("epochs must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Contract(format!(
                "alpha {} outside (0, 1]",
                self.alpha
            )));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::Contract(format!(
                "theta {} must be positive",
                self.theta
            )));
        }
        Ok(())
    }

    /// `T(t)` for `0 <= t < epochs`.
    pub fn decay_factor(&self, t: u32) -> Result<f64> {
        if t >= self.epochs {
            return Err(Error::Contract(format!(
                "epoch {t} outside [0, {})",
                self.epochs
            )));
        }
        let ratio = t as f64 / self.epochs as f64;
        Ok(match self.decay {
            Decay::Linear => 1.0 - ratio,
            Decay::Exponential => (-ratio).exp(),
        })
    }

    /// Learning rate at epoch `t`: `alpha * T(t)`.
    pub fn learning_rate(&self, t: u32) -> Result<f64> {
        Ok(self.alpha * self.decay_factor(t)?)
    }

    /// Gaussian neighborhood weight of neuron `i` around the winner `i_star`.
    pub fn neighborhood(
        &self,
        grid: &GridTopology,
        t: u32,
        i_star: usize,
        i: usize,
    ) -> Result<f64> {
        let width = self.theta * self.decay_factor(t)?;
        let d2 = grid.distance_sq(i_star, i)?;
        Ok((-d2 / (2.0 * width * width)).exp())
    }
}

/// A trained (or freshly initialized) codebook of `grid.len()` weight vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Som {
    dim: usize,
    grid: GridTopology,
    weights: Vec<f32>,
}

impl Som {
    /// Builds a map from row-major weights (`grid.len() * dim` values).
    pub fn from_weights(dim: usize, grid: GridTopology, weights: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Contract(
                "som input dimension must be at least 1".into(),
            ));
        }
        if weights.len() != grid.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: grid.len() * dim,
                actual: weights.len(),
            });
        }
        if let Some(pos) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::Contract(format!(
                "weight of neuron {} is not finite",
                pos / dim
            )));
        }
        Ok(Som { dim, grid, weights })
    }

    /// Each neuron starts as a copy of a training sample drawn uniformly with
    /// replacement.
    pub fn init(
        config: &SomTrainConfig,
        dim: usize,
        grid: GridTopology,
        data: &[&[f32]],
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("som initialization"));
        }
        check_samples(dim, data)?;
        let mut rng = rng::seeded(config.seed);
        let mut weights = Vec::with_capacity(grid.len() * dim);
        for _ in 0..grid.len() {
            weights.extend_from_slice(data[rng::index(&mut rng, data.len())]);
        }
        Som::from_weights(dim, grid, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &GridTopology {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn weight(&self, i: usize) -> &[f32] {
        &self.weights[i * self.dim..(i + 1) * self.dim]
    }

    /// All weights, row-major.
    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn bmu(&self, x: &[f32]) -> Result<usize> {
        self.check_dim(x)?;
        Ok(self.bmu_unchecked(x))
    }

    pub(crate) fn bmu_unchecked(&self, x: &[f32]) -> usize {
        let mut best = 0;
        let mut best_dist = f32::INFINITY;
        for (i, w) in self.weights.chunks_exact(self.dim).enumerate() {
            let d = squared_distance(w, x);
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        best
    }

    /// Index of the largest dot product `w_i . x` (lowest index on ties).
    ///
    /// For unit-norm weights and input this selects the same neuron as
    /// [`Som::bmu`].
    pub fn argmax_dot(&self, x: &[f32]) -> Result<usize> {
        self.check_dim(x)?;
        let mut best = 0;
        let mut best_dot = f32::NEG_INFINITY;
        for (i, w) in self.weights.chunks_exact(self.dim).enumerate() {
            let d: f32 = w.iter().zip(x).map(|(a, b)| a * b).sum();
            if d > best_dot {
                best = i;
                best_dot = d;
            }
        }
        Ok(best)
    }

    /// Winner-Takes-All output: a single 1 at the BMU.
    pub fn quantize_onehot(&self, x: &[f32]) -> Result<Vec<u8>> {
        let winner = self.bmu(x)?;
        let mut out = vec![0u8; self.len()];
        out[winner] = 1;
        Ok(out)
    }

    /// Runs `config.epochs` epochs of online training over `data`.
    ///
    /// Each epoch reshuffles the sample order from a single seeded stream and
    /// applies one update per sample in that order.
    pub fn train(&mut self, config: &SomTrainConfig, data: &[&[f32]]) -> Result<()> {
        config.validate()?;
        check_samples(self.dim, data)?;
        let n = self.len();
        let mut rng = rng::seeded(rng::derive_seed(config.seed, SHUFFLE_STREAM));
        let mut order: Vec<usize> = (0..data.len()).collect();
        // retain[i_star * n + i] = 1 - A(t) * Theta(t, i_star, i)
        let mut retain = vec![0f32; n * n];
        for t in 0..config.epochs {
            let rate = config.learning_rate(t)?;
            for i_star in 0..n {
                for i in 0..n {
                    let step = rate * config.neighborhood(&self.grid, t, i_star, i)?;
                    retain[i_star * n + i] = (1.0 - step) as f32;
                }
            }
            rng::shuffle(&mut rng, &mut order);
            for &s in &order {
                let x = data[s];
                let winner = self.bmu_unchecked(x);
                let row = &retain[winner * n..(winner + 1) * n];
                for (w, &keep) in self.weights.chunks_exact_mut(self.dim).zip(row) {
                    if keep == 1.0 {
                        continue;
                    }
                    // distance to x shrinks by `keep`; keep == 0 lands exactly on x
                    for (wj, &xj) in w.iter_mut().zip(x) {
                        *wj = xj - (xj - *wj) * keep;
                    }
                }
            }
        }
        Ok(())
    }

    /// Mean Euclidean distance from each sample to its BMU weight.
    pub fn quantization_error(&self, data: &[&[f32]]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Empty("quantization error"));
        }
        let mut total = 0f64;
        for x in data {
            self.check_dim(x)?;
            let w = self.weight(self.bmu_unchecked(x));
            total += (squared_distance(w, x) as f64).sqrt();
        }
        Ok(total / data.len() as f64)
    }

    fn check_dim(&self, x: &[f32]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn squared_distance(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_samples(dim: usize, data: &[&[f32]]) -> Result<()> {
    for (index, x) in data.iter().enumerate() {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
    }
    Ok(())
}
