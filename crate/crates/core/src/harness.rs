//! Prequential experiment driver and report emission.
//!
//! Each run replays the stream once: batch 0 only initializes the method,
//! every later batch is first predicted and scored, then used for training
//! (`iter` times in a row). Runtime covers the method calls only; batch
//! materialization and scoring are outside the timer.

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{Majority, Negative, Obr, Oecc, StreamLearner, DEFAULT_ENSEMBLE_SIZE};
use crate::compression::{default_reduced_size, Race, RaceConfig, Variant};
use crate::data_io::{batch_iter, load_dataset, synth_stream, Dataset, StreamConfig, SynthConfig};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, competition_ranks, ConfusionAccumulator, Metric, MetricsReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Race(Variant),
    Obr,
    Oecc,
    Majority,
    Negative,
}

impl Method {
    pub fn descriptor(&self) -> String {
        match self {
            Method::Race(v) => format!("RACE({v})"),
            Method::Obr => "OBR".into(),
            Method::Oecc => "OECC".into(),
            Method::Majority => "Majority".into(),
            Method::Negative => "Negative".into(),
        }
    }

    pub fn variant(&self) -> Option<Variant> {
        match self {
            Method::Race(v) => Some(*v),
            _ => None,
        }
    }

    /// Instantiates the method for a stream with the given schema.
    pub fn build(&self, dataset: &Dataset, k: Option<usize>, seed: u64) -> Result<Box<dyn StreamLearner>> {
        let schema = dataset.feature_kinds();
        let l = dataset.num_labels();
        Ok(match self {
            Method::Race(variant) => {
                let mut cfg = RaceConfig::new(l, *variant, seed);
                if let Some(k) = k {
                    cfg = cfg.with_reduced(k);
                }
                Box::new(Race::new(cfg, &schema)?)
            }
            Method::Obr => Box::new(Obr::new(&schema, l)),
            Method::Oecc => Box::new(Oecc::new(&schema, l, DEFAULT_ENSEMBLE_SIZE, seed)),
            Method::Majority => Box::new(Majority::new(l)),
            Method::Negative => Box::new(Negative::new(l)),
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor())
    }
}

/// Accepts `race:<variant>`, `obr`, `oecc`, `majority`, `negative`.
impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if let Some(v) = lower.strip_prefix("race:") {
            return Ok(Method::Race(v.parse()?));
        }
        match lower.as_str() {
            "race" => Ok(Method::Race(Variant::ClsAdaptive)),
            "obr" => Ok(Method::Obr),
            "oecc" => Ok(Method::Oecc),
            "majority" => Ok(Method::Majority),
            "negative" => Ok(Method::Negative),
            _ => Err(Error::InvalidArgument(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    Files { arff: PathBuf, labels: PathBuf },
    Synthetic(SynthConfig),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Files { arff, labels } => load_dataset(arff, labels),
            DataSource::Synthetic(cfg) => synth_stream(cfg),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub methods: Vec<Method>,
    /// Reduced label count for RACE; `None` uses `⌈log₂ l⌉`.
    pub k: Option<usize>,
    pub window: usize,
    pub runs: usize,
    pub seed: u64,
    /// Consecutive training presentations of every batch.
    pub iter: usize,
}

impl ExperimentConfig {
    pub fn new(source: DataSource, methods: Vec<Method>, window: usize) -> Self {
        ExperimentConfig {
            source,
            methods,
            k: None,
            window,
            runs: 10,
            seed: 1,
            iter: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.iter == 0 || self.window == 0 {
            return Err(Error::InvalidArgument(
                "runs, iter and window must all be >= 1".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no method selected".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub dataset: String,
    pub method: String,
    pub variant: Option<Variant>,
    /// Reduced label count, RACE only.
    pub k: Option<usize>,
    pub seed: u64,
    /// One report per scored batch; `runtime_seconds` is that batch's time.
    pub batches: Vec<MetricsReport>,
    /// Equal-weight mean over scored batches; runtime is the whole run.
    pub aggregate: MetricsReport,
    pub runtime_seconds: f64,
}

/// Runs one method over the stream once.
pub fn run_method(
    dataset: &Dataset,
    method: Method,
    k: Option<usize>,
    window: usize,
    iter: usize,
    seed: u64,
) -> Result<RunResult> {
    let mut learner = method.build(dataset, k, seed)?;
    let arity = dataset.num_features();
    let mut batches = Vec::new();
    let mut total = 0.0;

    for batch in batch_iter(dataset, &StreamConfig::new(window))? {
        let b = batch.index;
        if batch.features.cols() != arity {
            return Err(Error::Stream {
                batch: b,
                message: format!(
                    "feature arity changed from {arity} to {}",
                    batch.features.cols()
                ),
            });
        }
        let wrap = |e: Error| Error::Stream {
            batch: b,
            message: e.to_string(),
        };
        let start = Instant::now();
        let prediction = if b == 0 {
            None
        } else {
            Some(learner.predict(&batch.features).map_err(wrap)?)
        };
        let predict_time = start.elapsed().as_secs_f64();

        let start = Instant::now();
        for _ in 0..iter {
            learner
                .train(&batch.features, &batch.labels)
                .map_err(wrap)?;
        }
        let elapsed = predict_time + start.elapsed().as_secs_f64();
        total += elapsed;

        if let Some(y) = prediction {
            let acc = ConfusionAccumulator::from_batch(&batch.labels, &y).map_err(wrap)?;
            batches.push(acc.report(elapsed));
        }
    }

    let mut agg = aggregate(&batches).mean;
    agg.runtime_seconds = total;
    let k = method
        .variant()
        .map(|_| k.unwrap_or_else(|| default_reduced_size(dataset.num_labels())));
    Ok(RunResult {
        dataset: dataset.name.clone(),
        method: method.descriptor(),
        variant: method.variant(),
        k,
        seed,
        batches,
        aggregate: agg,
        runtime_seconds: total,
    })
}

/// Every configured method, `runs` times with seeds `seed, seed + 1, ...`.
pub fn run_prequential(config: &ExperimentConfig, dataset: &Dataset) -> Result<Vec<RunResult>> {
    config.validate()?;
    let mut results = Vec::with_capacity(config.methods.len() * config.runs);
    for &method in &config.methods {
        for r in 0..config.runs {
            results.push(run_method(
                dataset,
                method,
                config.k,
                config.window,
                config.iter,
                config.seed + r as u64,
            )?);
        }
    }
    Ok(results)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunResult>> {
    config.validate()?;
    let dataset = config.source.load()?;
    run_prequential(config, &dataset)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub method: String,
    pub variant: String,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    pub rank: usize,
}

/// Per-batch values of one metric, averaged over runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub dataset: String,
    pub method: String,
    pub variant: String,
    pub metric: Metric,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub series: Vec<Series>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::InvalidArgument(format!("unknown format `{s}`"))),
        }
    }
}

fn variant_label(v: Option<Variant>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

/// Groups results by (dataset, method, variant, k) in first-seen order.
fn group_results(results: &[RunResult]) -> Vec<Vec<&RunResult>> {
    let mut groups: Vec<Vec<&RunResult>> = Vec::new();
    for r in results {
        let key = (&r.dataset, &r.method, r.variant, r.k);
        match groups
            .iter_mut()
            .find(|g| (&g[0].dataset, &g[0].method, g[0].variant, g[0].k) == key)
        {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    groups
}

impl Report {
    pub fn from_results(results: &[RunResult]) -> Report {
        let groups = group_results(results);
        let aggregates: Vec<_> = groups
            .iter()
            .map(|g| aggregate(&g.iter().map(|r| r.aggregate).collect::<Vec<_>>()))
            .collect();

        let mut rows = Vec::new();
        let mut series = Vec::new();
        for (gi, group) in groups.iter().enumerate() {
            let head = group[0];
            for metric in Metric::ALL {
                let peers: Vec<usize> = (0..groups.len())
                    .filter(|&o| groups[o][0].dataset == head.dataset)
                    .collect();
                let values: Vec<f64> = peers.iter().map(|&o| aggregates[o].mean.get(metric)).collect();
                let ranks = competition_ranks(&values, metric.lower_is_better());
                let rank = ranks[peers.iter().position(|&o| o == gi).unwrap()];
                rows.push(ReportRow {
                    dataset: head.dataset.clone(),
                    method: head.method.clone(),
                    variant: variant_label(head.variant),
                    metric,
                    mean: aggregates[gi].mean.get(metric),
                    std: aggregates[gi].std.get(metric),
                    rank,
                });

                let len = group.iter().map(|r| r.batches.len()).min().unwrap_or(0);
                let values = (0..len)
                    .map(|b| {
                        group.iter().map(|r| r.batches[b].get(metric)).sum::<f64>() / group.len() as f64
                    })
                    .collect();
                series.push(Series {
                    dataset: head.dataset.clone(),
                    method: head.method.clone(),
                    variant: variant_label(head.variant),
                    metric,
                    values,
                });
            }
        }
        Report { rows, series }
    }

    /// Copy with every runtime value zeroed, for byte-level comparisons.
    pub fn without_runtime(&self) -> Report {
        let mut out = self.clone();
        for row in out.rows.iter_mut().filter(|r| r.metric == Metric::RuntimeSeconds) {
            row.mean = 0.0;
            row.std = 0.0;
            row.rank = 0;
        }
        for s in out.series.iter_mut().filter(|s| s.metric == Metric::RuntimeSeconds) {
            s.values.iter_mut().for_each(|v| *v = 0.0);
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["dataset", "method", "variant", "metric", "mean", "std", "rank"])?;
        for r in &self.rows {
            w.write_record([
                r.dataset.clone(),
                r.method.clone(),
                r.variant.clone(),
                r.metric.to_string(),
                r.mean.to_string(),
                r.std.to_string(),
                r.rank.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Report> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn write_output(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Output {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

pub fn emit_report(results: &[RunResult], format: OutputFormat, path: Option<&Path>) -> Result<()> {
    write_output(&Report::from_results(results).render(format)?, path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub dataset: String,
    pub method: String,
    pub variant: String,
    pub k: usize,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    /// Metric-vs-k values of one method, in sweep order.
    pub fn series(&self, method: &str, metric: Metric) -> Vec<(usize, f64)> {
        self.points
            .iter()
            .filter(|p| p.method == method && p.metric == metric)
            .map(|p| (p.k, p.mean))
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["dataset", "method", "variant", "k", "metric", "mean", "std"])?;
        for p in &self.points {
            w.write_record([
                p.dataset.clone(),
                p.method.clone(),
                p.variant.clone(),
                p.k.to_string(),
                p.metric.to_string(),
                p.mean.to_string(),
                p.std.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }
}

/// Default sweep range: `⌈log₂ l⌉ ..= min(⌈log₂ l⌉², l)`.
pub fn default_k_range(labels: usize) -> (usize, usize) {
    let lo = default_reduced_size(labels);
    (lo, (lo * lo).min(labels).max(lo))
}

/// Repeats the prequential experiment for every `k` (RACE methods only).
pub fn sweep_k(config: &ExperimentConfig, dataset: &Dataset, k_values: &[usize]) -> Result<SweepReport> {
    if let Some(m) = config.methods.iter().find(|m| m.variant().is_none()) {
        return Err(Error::InvalidArgument(format!(
            "k sweep applies to RACE variants only, got {m}"
        )));
    }
    let mut points = Vec::new();
    for &method in &config.methods {
        let mut per_k = Vec::with_capacity(k_values.len());
        for &k in k_values {
            let cfg = ExperimentConfig {
                methods: vec![method],
                k: Some(k),
                ..config.clone()
            };
            let runs = run_prequential(&cfg, dataset)?;
            per_k.push((k, aggregate(&runs.iter().map(|r| r.aggregate).collect::<Vec<_>>())));
        }
        for metric in Metric::ALL {
            for (k, agg) in &per_k {
                points.push(SweepPoint {
                    dataset: dataset.name.clone(),
                    method: method.descriptor(),
                    variant: variant_label(method.variant()),
                    k: *k,
                    metric,
                    mean: agg.mean.get(metric),
                    std: agg.std.get(metric),
                });
            }
        }
    }
    Ok(SweepReport { points })
}
