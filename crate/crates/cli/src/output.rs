use somsam::harness::{EvalReport, TrainParams};
use somsam::{Decay, Mode};

use crate::Format;

/// Bumped when a CSV schema changes.
pub const CSV_VERSION: u32 = 1;

/// CSV on stdout, preceded by one `#` line holding the resolved configuration.
pub struct Csv;

impl Csv {
    pub fn new(command: &str, context: &[(&str, String)], params: Option<&TrainParams>) -> Csv {
        let mut line = format!("# somsam-csv v{CSV_VERSION} command={command}");
        for (k, v) in context {
            line.push_str(&format!(" {k}={v}"));
        }
        if let Some(p) = params {
            line.push_str(&format!(" {}", describe(p)));
        }
        println!("{line}");
        Csv
    }

    pub fn header(&mut self, cols: &[&str]) {
        println!("{}", cols.join(","));
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        let cells: Vec<&str> = cells.iter().map(AsRef::as_ref).collect();
        println!("{}", cells.join(","));
    }
}

pub fn describe(p: &TrainParams) -> String {
    let decay = match p.config.decay {
        Decay::Linear => "linear",
        Decay::Exponential => "exponential",
    };
    let mode = match p.mode {
        Mode::Binary => "binary",
        Mode::Integer => "integer",
    };
    format!(
        "k={} n={} grid={}x{} epochs={} alpha={} theta={} decay={decay} mode={mode} seed={}",
        p.k,
        p.grid.len(),
        p.grid.rows(),
        p.grid.cols(),
        p.config.epochs,
        p.config.alpha,
        p.config.theta,
        p.config.seed
    )
}

pub fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

pub fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

/// Long format: `metric,key,value`. `top` rows are keyed by K, `class_top1`
/// rows by label.
pub fn eval_report(command: &str, context: &[(&str, String)], report: &EvalReport, format: Format) {
    match format {
        Format::Csv => {
            let context: Vec<(&str, String)> = context
                .iter()
                .map(|(k, v)| (*k, v.replace(',', ";")))
                .collect();
            let mut csv = Csv::new(command, &context, None);
            csv.header(&["metric", "key", "value"]);
            for (k, acc) in &report.topk {
                csv.row(&["top".into(), k.to_string(), fmt(*acc)]);
            }
            for c in &report.per_class {
                csv.row(&["class_top1".into(), c.label.to_string(), fmt(c.top1)]);
            }
            csv.row(&["samples", "", &report.samples.to_string()]);
            csv.row(&["eval_ms", "", &format!("{:.3}", report.eval_ms)]);
        }
        Format::Json => {
            let ctx: serde_json::Map<String, serde_json::Value> = context
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone().into()))
                .collect();
            let value = serde_json::json!({
                "version": CSV_VERSION,
                "command": command,
                "config": ctx,
                "samples": report.samples,
                "topk": report.topk.iter().map(|(k, a)| serde_json::json!({"k": k, "accuracy": a})).collect::<Vec<_>>(),
                "per_class": report.per_class.iter().map(|c| serde_json::json!({
                    "label": c.label, "samples": c.samples, "top1": c.top1
                })).collect::<Vec<_>>(),
                "eval_ms": report.eval_ms,
            });
            println!("{}", serde_json::to_string_pretty(&value).expect("json"));
        }
    }
}
