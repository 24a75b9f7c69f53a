//! Experiment drivers behind the CLI: training, Top-K evaluation,
//! class-incremental curves, the k-NN baseline and the timing bench.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::dataio::{FeatureSet, Model};
use crate::error::{Error, Result};
use crate::knn::KnnClassifier;
use crate::pq::{ProductQuantizer, SparseCode};
use crate::rng;
use crate::sam::{AssociativeClassifier, Mode};
use crate::som::{GridTopology, SomTrainConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub k: usize,
    pub grid: GridTopology,
    pub config: SomTrainConfig,
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PhaseTimes {
    pub quantizer: Duration,
    pub classifier: Duration,
}

fn class_id(label: u32) -> usize {
    label as usize
}

pub fn train_quantizer(train: &FeatureSet, params: &TrainParams) -> Result<ProductQuantizer> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    ProductQuantizer::train(&params.config, params.k, params.grid, &train.vectors())
}

pub fn quantize_all(pq: &ProductQuantizer, set: &FeatureSet) -> Result<Vec<SparseCode>> {
    set.records()
        .par_iter()
        .map(|r| pq.quantize(&r.vector))
        .collect()
}

/// Quantizes and learns `set` in one pass.
pub fn learn_set(
    pq: &ProductQuantizer,
    clf: &mut AssociativeClassifier,
    set: &FeatureSet,
) -> Result<()> {
    for r in set.records() {
        clf.learn(&pq.quantize(&r.vector)?, class_id(r.label))?;
    }
    Ok(())
}

/// Trains the quantizer, then the classifier in one pass over the codes.
pub fn train_model(train: &FeatureSet, params: &TrainParams) -> Result<(Model, PhaseTimes)> {
    let start = Instant::now();
    let pq = train_quantizer(train, params)?;
    let quantizer = start.elapsed();

    let start = Instant::now();
    let mut clf = AssociativeClassifier::new(params.mode, params.k, params.grid.len())?;
    learn_set(&pq, &mut clf, train)?;
    let classifier = start.elapsed();

    Ok((
        Model::new(params.config, pq, clf)?,
        PhaseTimes {
            quantizer,
            classifier,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassAccuracy {
    pub label: u32,
    pub samples: usize,
    pub top1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `(K, accuracy)` in requested order.
    pub topk: Vec<(usize, f64)>,
    pub per_class: Vec<ClassAccuracy>,
    pub samples: usize,
    pub train_ms: f64,
    pub eval_ms: f64,
}

impl EvalReport {
    pub fn accuracy(&self, k: usize) -> Option<f64> {
        self.topk.iter().find(|(kk, _)| *kk == k).map(|(_, a)| *a)
    }
}

/// Ranks (best first) for each test record, hit if the true label is among
/// the first `K`. `ranks` returns at least `max(topk)` labels, or all of them
/// when there are fewer classes.
fn score_ranked<F>(test: &FeatureSet, topk: &[usize], ranks: F) -> Result<EvalReport>
where
    F: Fn(&[f32], usize) -> Result<Vec<u32>> + Sync,
{
    if test.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    if topk.is_empty() || topk.contains(&0) {
        return Err(Error::Contract(format!("invalid top-k list {topk:?}")));
    }
    let start = Instant::now();
    let max_k = *topk.iter().max().unwrap();
    // position of the true label in the ranking, if within max_k
    let positions: Vec<Option<usize>> = test
        .records()
        .par_iter()
        .map(|r| {
            let ranked = ranks(&r.vector, max_k)?;
            Ok(ranked.iter().take(max_k).position(|&c| c == r.label))
        })
        .collect::<Result<_>>()?;
    let n = test.len() as f64;
    let topk = topk
        .iter()
        .map(|&k| {
            let hits = positions
                .iter()
                .filter(|p| matches!(p, Some(i) if *i < k))
                .count();
            (k, hits as f64 / n)
        })
        .collect();
    let per_class = test
        .labels()
        .into_iter()
        .map(|label| {
            let (mut samples, mut hits) = (0, 0);
            for (r, p) in test.records().iter().zip(&positions) {
                if r.label == label {
                    samples += 1;
                    hits += usize::from(*p == Some(0));
                }
            }
            ClassAccuracy {
                label,
                samples,
                top1: hits as f64 / samples as f64,
            }
        })
        .collect();
    Ok(EvalReport {
        topk,
        per_class,
        samples: test.len(),
        train_ms: 0.0,
        eval_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Top-K accuracy of a trained quantizer and classifier. `K` values larger
/// than the number of classes are clamped to it.
pub fn evaluate_parts(
    pq: &ProductQuantizer,
    clf: &AssociativeClassifier,
    test: &FeatureSet,
    topk: &[usize],
) -> Result<EvalReport> {
    if test.dim() != pq.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: pq.input_dim(),
            actual: test.dim(),
        });
    }
    if clf.num_classes() == 0 {
        return Err(Error::EmptyClassifier);
    }
    score_ranked(test, topk, |x, max_k| {
        let code = pq.quantize(x)?;
        let ranked = clf.top_k(&code, max_k.min(clf.num_classes()))?;
        Ok(ranked.into_iter().map(|(c, _)| c as u32).collect())
    })
}

pub fn evaluate(model: &Model, test: &FeatureSet, topk: &[usize]) -> Result<EvalReport> {
    evaluate_parts(model.quantizer(), model.classifier(), test, topk)
}

pub fn knn_baseline(
    train: &FeatureSet,
    test: &FeatureSet,
    knn_k: usize,
    topk: &[usize],
) -> Result<EvalReport> {
    if train.dim() != test.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            actual: test.dim(),
        });
    }
    let knn = KnnClassifier::new(train)?;
    if knn_k == 0 || knn_k > train.len() {
        return Err(Error::Contract(format!(
            "knn-k = {knn_k} with {} training points",
            train.len()
        )));
    }
    score_ranked(test, topk, |x, _| knn.rank_classes(x, knn_k))
}

/// Order in which classes are added along an incremental curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassOrder {
    LabelAscending,
    Shuffled(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub classes_learned: usize,
    pub top1: f64,
    pub top5: f64,
    pub batch_top1: f64,
    pub batch_top5: f64,
}

/// Grows a classifier one class at a time and evaluates after each class on
/// the test records of the classes learned so far.
///
/// The quantizer is trained once on the whole training set. Classes are
/// relabeled by the order they are learned, so class ids stay dense. After
/// each step a second classifier is rebuilt from scratch on all classes seen
/// so far (records interleaved in file order); its matrix must equal the
/// incremental one, otherwise this returns a contract error.
pub fn incremental_curve(
    train: &FeatureSet,
    test: &FeatureSet,
    params: &TrainParams,
    order: ClassOrder,
) -> Result<Vec<CurvePoint>> {
    let pq = train_quantizer(train, params)?;
    incremental_curve_with(&pq, train, test, params.mode, order)
}

pub fn incremental_curve_with(
    pq: &ProductQuantizer,
    train: &FeatureSet,
    test: &FeatureSet,
    mode: Mode,
    order: ClassOrder,
) -> Result<Vec<CurvePoint>> {
    let mut classes = train.labels();
    if let ClassOrder::Shuffled(seed) = order {
        rng::shuffle(&mut rng::seeded(seed), &mut classes);
    }
    let position = |label: u32| classes.iter().position(|&c| c == label);

    let train_codes = quantize_all(pq, train)?;
    let train_pairs: Vec<(SparseCode, usize, u32)> = train_codes
        .into_iter()
        .zip(train.records())
        .map(|(code, r)| (code, position(r.label).unwrap(), r.label))
        .collect();

    let mut seq = AssociativeClassifier::new(mode, pq.k(), pq.n_per_som())?;
    let mut curve = Vec::with_capacity(classes.len());
    for (step, &label) in classes.iter().enumerate() {
        for (code, id, l) in &train_pairs {
            if *l == label {
                seq.learn(code, *id)?;
            }
        }
        let seen = &classes[..=step];
        let batch_pairs: Vec<(SparseCode, usize)> = train_pairs
            .iter()
            .filter(|(_, id, _)| *id <= step)
            .map(|(c, id, _)| (c.clone(), *id))
            .collect();
        let mut batch = AssociativeClassifier::new(mode, pq.k(), pq.n_per_som())?;
        batch.learn_batch(&batch_pairs)?;
        if batch != seq {
            return Err(Error::Contract(format!(
                "incremental and batch classifiers differ after {} classes",
                step + 1
            )));
        }

        // relabel the restricted test set to learning-order ids
        let restricted = test.filter_labels(|l| seen.contains(&l));
        if restricted.is_empty() {
            return Err(Error::Empty("test records for learned classes"));
        }
        let relabeled = FeatureSet::new(
            restricted.dim(),
            restricted
                .records()
                .iter()
                .map(|r| crate::dataio::Record {
                    label: position(r.label).unwrap() as u32,
                    vector: r.vector.clone(),
                })
                .collect(),
        )?;
        let inc = evaluate_parts(pq, &seq, &relabeled, &[1, 5])?;
        let bat = evaluate_parts(pq, &batch, &relabeled, &[1, 5])?;
        let point = CurvePoint {
            classes_learned: step + 1,
            top1: inc.topk[0].1,
            top5: inc.topk[1].1,
            batch_top1: bat.topk[0].1,
            batch_top5: bat.topk[1].1,
        };
        if point.top1 != point.batch_top1 || point.top5 != point.batch_top5 {
            return Err(Error::Contract(format!(
                "incremental and batch accuracy differ after {} classes",
                step + 1
            )));
        }
        curve.push(point);
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRun {
    pub full_ns: u128,
    pub incremental_ns: u128,
}

impl TimingRun {
    pub fn ratio(&self) -> f64 {
        self.full_ns as f64 / self.incremental_ns.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub classes: usize,
    pub last_class: u32,
    pub full_samples: usize,
    pub last_class_samples: usize,
    /// Samples the incremental update actually consumed, measured as the
    /// growth of the classifier's per-class sample counters.
    pub incremental_samples_processed: u64,
    pub runs: Vec<TimingRun>,
}

impl TimingReport {
    /// Ratio of the best full time to the best incremental time.
    pub fn best_ratio(&self) -> f64 {
        let full = self.runs.iter().map(|r| r.full_ns).min().unwrap_or(0);
        let inc = self
            .runs
            .iter()
            .map(|r| r.incremental_ns)
            .min()
            .unwrap_or(1);
        full as f64 / inc.max(1) as f64
    }
}

/// Classifier training time for the whole set versus adding only the last
/// class to a classifier that already knows the others.
///
/// Both timings include quantizing the samples being learned and exclude
/// quantizer training. Each of the `runs` entries is the best of `inner`
/// timed repetitions.
pub fn bench_timing(
    pq: &ProductQuantizer,
    train: &FeatureSet,
    mode: Mode,
    runs: usize,
    inner: usize,
) -> Result<TimingReport> {
    let labels = train.labels();
    let &last_class = labels.last().ok_or(Error::Empty("training set"))?;
    let (last, rest) = (
        train.filter_labels(|l| l == last_class),
        train.filter_labels(|l| l != last_class),
    );
    let fresh = || AssociativeClassifier::new(mode, pq.k(), pq.n_per_som());

    let mut base = fresh()?;
    learn_set(pq, &mut base, &rest)?;
    let mut full_reference = fresh()?;
    learn_set(pq, &mut full_reference, train)?;

    let mut processed = 0;
    let mut timed_runs = Vec::with_capacity(runs);
    for _ in 0..runs.max(1) {
        let mut best_full = u128::MAX;
        let mut best_inc = u128::MAX;
        for _ in 0..inner.max(1) {
            let mut clf = fresh()?;
            let start = Instant::now();
            learn_set(pq, &mut clf, train)?;
            best_full = best_full.min(start.elapsed().as_nanos());
            debug_assert_eq!(clf, full_reference);

            let mut clf = base.clone();
            let start = Instant::now();
            learn_set(pq, &mut clf, &last)?;
            best_inc = best_inc.min(start.elapsed().as_nanos());

            let before: u64 = base.samples_per_class().iter().sum();
            let after: u64 = clf.samples_per_class().iter().sum();
            processed = after - before;
            for class in 0..base.num_classes() {
                if class != class_id(last_class) {
                    for col in 0..clf.columns() {
                        if clf.cell(class, col) != base.cell(class, col) {
                            return Err(Error::Contract(format!(
                                "adding class {last_class} changed class {class}"
                            )));
                        }
                    }
                }
            }
            if clf != full_reference {
                return Err(Error::Contract(
                    "incremental classifier differs from the full retrain".into(),
                ));
            }
        }
        timed_runs.push(TimingRun {
            full_ns: best_full,
            incremental_ns: best_inc,
        });
    }
    Ok(TimingReport {
        classes: labels.len(),
        last_class,
        full_samples: train.len(),
        last_class_samples: last.len(),
        incremental_samples_processed: processed,
        runs: timed_runs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub report: EvalReport,
}

/// Trains and evaluates `runs` times. With `vary_seed`, run `r` uses
/// `derive_seed(seed, r)`; otherwise every run reuses `seed`.
pub fn repeated_runs(
    train: &FeatureSet,
    test: &FeatureSet,
    params: &TrainParams,
    runs: usize,
    vary_seed: bool,
    topk: &[usize],
) -> Result<Vec<RunSummary>> {
    (0..runs as u64)
        .map(|r| {
            let seed = if vary_seed {
                rng::derive_seed(params.config.seed, r)
            } else {
                params.config.seed
            };
            let p = TrainParams {
                config: SomTrainConfig {
                    seed,
                    ..params.config
                },
                ..*params
            };
            let (model, times) = train_model(train, &p)?;
            let mut report = evaluate(&model, test, topk)?;
            report.train_ms = times.classifier.as_secs_f64() * 1e3;
            Ok(RunSummary { seed, report })
        })
        .collect()
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
