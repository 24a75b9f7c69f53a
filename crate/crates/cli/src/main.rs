//! `somsam`: train, evaluate and benchmark the SOM + associative-memory
//! classifier on FVB feature files.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use somsam::dataio::{self, SyntheticSpec};
use somsam::harness::{self, ClassOrder, TrainParams};
use somsam::{Decay, Error, FeatureSet, GridTopology, Mode, SomTrainConfig};

use crate::output::Csv;

#[derive(Parser, Debug)]
#[command(name = "somsam", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the quantizer and classifier on a feature file and save the model.
    Train(TrainCmd),
    /// Top-K accuracy of a saved model on a feature file.
    Eval(EvalCmd),
    /// Accuracy as classes are learned one at a time, with the batch retrain alongside.
    IncrementalCurve(CurveCmd),
    /// Brute-force cosine k-NN baseline.
    BaselineKnn(KnnCmd),
    /// Classifier training time: full retrain versus adding the last class.
    BenchTiming(TimingCmd),
    /// Repeated train + eval runs with mean and standard deviation.
    Bench(BenchCmd),
    /// Write a seeded synthetic Gaussian-cluster feature file.
    GenSynthetic(SynthCmd),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Binary,
    Integer,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DecayArg {
    Linear,
    Exponential,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OrderArg {
    LabelAscending,
    Seed,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scenario {
    Full,
    AddLastClass,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Number of SOMs (subspaces); must divide the feature dimension.
    #[arg(long)]
    k: usize,
    /// Neurons per SOM.
    #[arg(long)]
    n: usize,
    /// Grid shape as ROWSxCOLS (default: near-square for N).
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value_t = SomTrainConfig::DEFAULT_EPOCHS)]
    epochs: u32,
    #[arg(long, default_value_t = SomTrainConfig::DEFAULT_ALPHA)]
    alpha: f64,
    /// Neighborhood width (default: max(rows, cols) / 2).
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, value_enum, default_value_t = DecayArg::Linear)]
    decay: DecayArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Binary)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct TrainCmd {
    #[arg(long)]
    features: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalCmd {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,5")]
    topk: Vec<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct CurveCmd {
    #[arg(long)]
    features_train: PathBuf,
    #[arg(long)]
    features_test: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Class order; `seed` shuffles with --seed.
    #[arg(long, value_enum, default_value_t = OrderArg::LabelAscending)]
    order: OrderArg,
}

#[derive(Args, Debug)]
struct KnnCmd {
    #[arg(long)]
    features_train: PathBuf,
    #[arg(long)]
    features_test: PathBuf,
    #[arg(long, default_value_t = 5)]
    knn_k: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,5")]
    topk: Vec<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct TimingCmd {
    #[arg(long)]
    features: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t = Scenario::Both)]
    scenario: Scenario,
    /// Timed repetitions reported as separate rows.
    #[arg(long, default_value_t = 2)]
    runs: usize,
    /// Each reported time is the best of this many attempts.
    #[arg(long, default_value_t = 5)]
    inner: usize,
}

#[derive(Args, Debug)]
struct BenchCmd {
    #[arg(long)]
    features_train: PathBuf,
    #[arg(long)]
    features_test: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 30)]
    runs: usize,
    /// Reseed SOM training per run instead of reusing --seed.
    #[arg(long)]
    vary_seed: bool,
    #[arg(long, value_delimiter = ',', default_value = "1,5")]
    topk: Vec<usize>,
}

#[derive(Args, Debug)]
struct SynthCmd {
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    samples_per_class: usize,
    #[arg(long, default_value_t = 0.05)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Send the first SPLIT samples of each class to --out and the rest to --test-out.
    #[arg(long, requires = "test_out")]
    split: Option<usize>,
    #[arg(long)]
    test_out: Option<PathBuf>,
}

/// Exit codes: 2 usage, 3 data format, 4 shape mismatch, 5 I/O.
fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Contract(_) => 2,
        Error::Format { .. }
        | Error::NonFiniteSample { .. }
        | Error::Empty(_)
        | Error::Overflow { .. } => 3,
        Error::DimensionMismatch { .. }
        | Error::Indivisible { .. }
        | Error::Shape(_)
        | Error::EmptyClassifier => 4,
        Error::Io(_) => 5,
        Error::Som { .. } | Error::Pair { .. } => unreachable!("root unwraps context"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load(path: &PathBuf) -> somsam::Result<FeatureSet> {
    let set = dataio::read_features_file(path)?;
    let (set, skipped) = set.l2_normalize();
    if skipped > 0 {
        eprintln!(
            "warning: {skipped} all-zero vectors in {} left unnormalized",
            path.display()
        );
    }
    Ok(set)
}

impl ModelArgs {
    fn params(&self) -> somsam::Result<TrainParams> {
        let grid = match &self.grid {
            Some(spec) => {
                let (r, c) = spec
                    .split_once(['x', 'X'])
                    .and_then(|(r, c)| Some((r.parse().ok()?, c.parse().ok()?)))
                    .ok_or_else(|| Error::Contract(format!("grid '{spec}' is not ROWSxCOLS")))?;
                let g = GridTopology::new(r, c)?;
                if g.len() != self.n {
                    return Err(Error::Contract(format!(
                        "grid {spec} does not hold {} neurons",
                        self.n
                    )));
                }
                g
            }
            None => GridTopology::near_square(self.n)?,
        };
        let mut config = SomTrainConfig::defaults_for(&grid, self.seed);
        config.epochs = self.epochs;
        config.alpha = self.alpha;
        if let Some(theta) = self.theta {
            config.theta = theta;
        }
        config.decay = match self.decay {
            DecayArg::Linear => Decay::Linear,
            DecayArg::Exponential => Decay::Exponential,
        };
        config.validate()?;
        if self.k == 0 {
            return Err(Error::Contract("--k must be at least 1".into()));
        }
        Ok(TrainParams {
            k: self.k,
            grid,
            config,
            mode: match self.mode {
                ModeArg::Binary => Mode::Binary,
                ModeArg::Integer => Mode::Integer,
            },
        })
    }
}

fn check_divisible(set: &FeatureSet, k: usize) -> somsam::Result<()> {
    if !set.dim().is_multiple_of(k) {
        return Err(Error::Indivisible {
            len: set.dim(),
            parts: k,
        });
    }
    Ok(())
}

fn run(command: Command) -> somsam::Result<()> {
    match command {
        Command::Train(cmd) => {
            let params = cmd.model.params()?;
            let train = load(&cmd.features)?;
            check_divisible(&train, params.k)?;
            let (model, times) = harness::train_model(&train, &params)?;
            dataio::save_model_file(&model, &cmd.out)?;
            let quantizer_ms = times.quantizer.as_secs_f64() * 1e3;
            let classifier_ms = times.classifier.as_secs_f64() * 1e3;
            eprintln!("quantizer training: {quantizer_ms:.3} ms");
            eprintln!("classifier training: {classifier_ms:.3} ms");
            let mut csv = Csv::new(
                "train",
                &[
                    ("features", cmd.features.display().to_string()),
                    ("out", cmd.out.display().to_string()),
                ],
                Some(&params),
            );
            csv.header(&["records", "classes", "quantizer_ms", "classifier_ms"]);
            csv.row(&[
                train.len().to_string(),
                model.classifier().num_classes().to_string(),
                format!("{quantizer_ms:.3}"),
                format!("{classifier_ms:.3}"),
            ]);
        }
        Command::Eval(cmd) => {
            let model = dataio::load_model_file(&cmd.model)?;
            let test = load(&cmd.features)?;
            let report = harness::evaluate(&model, &test, &cmd.topk)?;
            let context = [
                ("model", cmd.model.display().to_string()),
                ("features", cmd.features.display().to_string()),
                ("topk", output::join(&cmd.topk)),
            ];
            output::eval_report("eval", &context, &report, cmd.format);
        }
        Command::IncrementalCurve(cmd) => {
            let params = cmd.model.params()?;
            let train = load(&cmd.features_train)?;
            let test = load(&cmd.features_test)?;
            check_divisible(&train, params.k)?;
            let order = match cmd.order {
                OrderArg::LabelAscending => ClassOrder::LabelAscending,
                OrderArg::Seed => ClassOrder::Shuffled(params.config.seed),
            };
            let curve = harness::incremental_curve(&train, &test, &params, order)?;
            let mut csv = Csv::new(
                "incremental-curve",
                &[
                    ("features_train", cmd.features_train.display().to_string()),
                    ("features_test", cmd.features_test.display().to_string()),
                    ("order", value_name(&cmd.order)),
                ],
                Some(&params),
            );
            csv.header(&[
                "classes_learned",
                "top1",
                "top5",
                "batch_top1",
                "batch_top5",
            ]);
            for p in curve {
                csv.row(&[
                    p.classes_learned.to_string(),
                    output::fmt(p.top1),
                    output::fmt(p.top5),
                    output::fmt(p.batch_top1),
                    output::fmt(p.batch_top5),
                ]);
            }
        }
        Command::BaselineKnn(cmd) => {
            let train = load(&cmd.features_train)?;
            let test = load(&cmd.features_test)?;
            let report = harness::knn_baseline(&train, &test, cmd.knn_k, &cmd.topk)?;
            let context = [
                ("features_train", cmd.features_train.display().to_string()),
                ("features_test", cmd.features_test.display().to_string()),
                ("knn_k", cmd.knn_k.to_string()),
                ("topk", output::join(&cmd.topk)),
            ];
            output::eval_report("baseline-knn", &context, &report, cmd.format);
        }
        Command::BenchTiming(cmd) => {
            let params = cmd.model.params()?;
            let train = load(&cmd.features)?;
            check_divisible(&train, params.k)?;
            let pq = harness::train_quantizer(&train, &params)?;
            let report = harness::bench_timing(&pq, &train, params.mode, cmd.runs, cmd.inner)?;
            if report.incremental_samples_processed != report.last_class_samples as u64 {
                return Err(Error::Contract(format!(
                    "incremental update processed {} samples, class {} has {}",
                    report.incremental_samples_processed,
                    report.last_class,
                    report.last_class_samples
                )));
            }
            let mut csv = Csv::new(
                "bench-timing",
                &[
                    ("features", cmd.features.display().to_string()),
                    ("scenario", value_name(&cmd.scenario)),
                    ("runs", cmd.runs.to_string()),
                    ("inner", cmd.inner.to_string()),
                ],
                Some(&params),
            );
            csv.header(&["run", "scenario", "samples", "ns", "ratio"]);
            for (i, r) in report.runs.iter().enumerate() {
                if matches!(cmd.scenario, Scenario::Full | Scenario::Both) {
                    csv.row(&[
                        i.to_string(),
                        "full".into(),
                        report.full_samples.to_string(),
                        r.full_ns.to_string(),
                        String::new(),
                    ]);
                }
                if matches!(cmd.scenario, Scenario::AddLastClass | Scenario::Both) {
                    csv.row(&[
                        i.to_string(),
                        "add-last-class".into(),
                        report.incremental_samples_processed.to_string(),
                        r.incremental_ns.to_string(),
                        String::new(),
                    ]);
                }
                if matches!(cmd.scenario, Scenario::Both) {
                    csv.row(&[
                        i.to_string(),
                        "ratio".into(),
                        String::new(),
                        String::new(),
                        output::fmt(r.ratio()),
                    ]);
                }
            }
            eprintln!(
                "{} classes; best full/incremental ratio {:.2}",
                report.classes,
                report.best_ratio()
            );
        }
        Command::Bench(cmd) => {
            let params = cmd.model.params()?;
            let train = load(&cmd.features_train)?;
            let test = load(&cmd.features_test)?;
            check_divisible(&train, params.k)?;
            let runs =
                harness::repeated_runs(&train, &test, &params, cmd.runs, cmd.vary_seed, &cmd.topk)?;
            let mut csv = Csv::new(
                "bench",
                &[
                    ("features_train", cmd.features_train.display().to_string()),
                    ("features_test", cmd.features_test.display().to_string()),
                    ("runs", cmd.runs.to_string()),
                    ("vary_seed", cmd.vary_seed.to_string()),
                ],
                Some(&params),
            );
            let mut header = vec!["run".to_string(), "seed".to_string()];
            header.extend(cmd.topk.iter().map(|k| format!("top{k}")));
            header.push("classifier_train_ms".into());
            csv.header(&header.iter().map(String::as_str).collect::<Vec<_>>());
            for (i, r) in runs.iter().enumerate() {
                let mut row = vec![i.to_string(), r.seed.to_string()];
                row.extend(r.report.topk.iter().map(|(_, a)| output::fmt(*a)));
                row.push(format!("{:.3}", r.report.train_ms));
                csv.row(&row);
            }
            for (stat, pick) in [("mean", 0usize), ("std", 1)] {
                let mut row = vec![stat.to_string(), String::new()];
                for j in 0..cmd.topk.len() {
                    let accs: Vec<f64> = runs.iter().map(|r| r.report.topk[j].1).collect();
                    let ms = harness::mean_std(&accs);
                    row.push(output::fmt(if pick == 0 { ms.0 } else { ms.1 }));
                }
                let times: Vec<f64> = runs.iter().map(|r| r.report.train_ms).collect();
                let ms = harness::mean_std(&times);
                row.push(format!("{:.3}", if pick == 0 { ms.0 } else { ms.1 }));
                csv.row(&row);
            }
        }
        Command::GenSynthetic(cmd) => {
            let set = dataio::generate_synthetic(&SyntheticSpec {
                num_classes: cmd.classes,
                dim: cmd.dim,
                samples_per_class: cmd.samples_per_class,
                cluster_spread: cmd.spread,
                seed: cmd.seed,
            })?;
            match (cmd.split, &cmd.test_out) {
                (Some(n), Some(test_out)) => {
                    let (train, test) = set.split_per_class(n);
                    dataio::write_features_file(&train, &cmd.out)?;
                    dataio::write_features_file(&test, test_out)?;
                    eprintln!("wrote {} + {} records", train.len(), test.len());
                }
                _ => {
                    dataio::write_features_file(&set, &cmd.out)?;
                    eprintln!("wrote {} records", set.len());
                }
            }
        }
    }
    Ok(())
}

fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value()
        .map(|p| p.get_name().to_string())
        .unwrap_or_default()
}
