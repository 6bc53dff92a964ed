//! Multi-label bipartition measures.
//!
//! Example-based measures treat a row with empty truth and empty prediction
//! as perfectly predicted (0/0 := 1). Label-based F-measures give no credit
//! when there is nothing to retrieve (0/0 := 0).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Per-label confusion counts plus running sums of example-based scores.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfusionAccumulator {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub tn: Vec<u64>,
    pub fn_: Vec<u64>,
    pub instances: u64,
    pub intersection: u64,
    pub union: u64,
    pub true_positives_total: u64,
    pub predicted_positives_total: u64,
    jaccard_sum: f64,
    f1_sum: f64,
    hamming_sum: f64,
    exact_matches: u64,
}

impl ConfusionAccumulator {
    pub fn new(labels: usize) -> Self {
        ConfusionAccumulator {
            tp: vec![0; labels],
            fp: vec![0; labels],
            tn: vec![0; labels],
            fn_: vec![0; labels],
            ..Default::default()
        }
    }

    pub fn labels(&self) -> usize {
        self.tp.len()
    }

    pub fn from_batch(truth: &Mat, pred: &Mat) -> Result<Self> {
        let mut acc = ConfusionAccumulator::new(truth.cols());
        acc.add_batch(truth, pred)?;
        Ok(acc)
    }

    pub fn add_batch(&mut self, truth: &Mat, pred: &Mat) -> Result<()> {
        check_pair(truth, pred)?;
        if truth.rows() > 0 && truth.cols() != self.labels() {
            return Err(Error::shape(
                "confusion accumulator",
                format!("{} labels", self.labels()),
                truth.cols(),
            ));
        }
        let l = truth.cols();
        for (t_row, p_row) in truth.row_iter().zip(pred.row_iter()) {
            let (mut inter, mut uni, mut n_true, mut n_pred, mut wrong) = (0u64, 0u64, 0u64, 0u64, 0u64);
            for j in 0..l {
                let t = t_row[j] == 1.0;
                let p = p_row[j] == 1.0;
                match (t, p) {
                    (true, true) => self.tp[j] += 1,
                    (false, true) => self.fp[j] += 1,
                    (false, false) => self.tn[j] += 1,
                    (true, false) => self.fn_[j] += 1,
                }
                inter += u64::from(t && p);
                uni += u64::from(t || p);
                n_true += u64::from(t);
                n_pred += u64::from(p);
                wrong += u64::from(t != p);
            }
            self.instances += 1;
            self.intersection += inter;
            self.union += uni;
            self.true_positives_total += n_true;
            self.predicted_positives_total += n_pred;
            self.jaccard_sum += ratio_or(inter as f64, uni as f64, 1.0);
            self.f1_sum += ratio_or(2.0 * inter as f64, (n_true + n_pred) as f64, 1.0);
            self.hamming_sum += if l == 0 { 0.0 } else { wrong as f64 / l as f64 };
            self.exact_matches += u64::from(wrong == 0);
        }
        Ok(())
    }

    /// Folds `other` into `self`; the result equals accumulating both
    /// streams in sequence.
    pub fn merge(&mut self, other: &ConfusionAccumulator) -> Result<()> {
        if self.labels() != other.labels() {
            return Err(Error::shape(
                "accumulator merge",
                self.labels(),
                other.labels(),
            ));
        }
        for j in 0..self.labels() {
            self.tp[j] += other.tp[j];
            self.fp[j] += other.fp[j];
            self.tn[j] += other.tn[j];
            self.fn_[j] += other.fn_[j];
        }
        self.instances += other.instances;
        self.intersection += other.intersection;
        self.union += other.union;
        self.true_positives_total += other.true_positives_total;
        self.predicted_positives_total += other.predicted_positives_total;
        self.jaccard_sum += other.jaccard_sum;
        self.f1_sum += other.f1_sum;
        self.hamming_sum += other.hamming_sum;
        self.exact_matches += other.exact_matches;
        Ok(())
    }

    fn per_instance(&self, sum: f64) -> f64 {
        if self.instances == 0 {
            0.0
        } else {
            sum / self.instances as f64
        }
    }

    pub fn hamming_loss(&self) -> f64 {
        self.per_instance(self.hamming_sum)
    }

    pub fn example_accuracy(&self) -> f64 {
        self.per_instance(self.jaccard_sum)
    }

    pub fn example_f1(&self) -> f64 {
        self.per_instance(self.f1_sum)
    }

    pub fn subset_accuracy(&self) -> f64 {
        self.per_instance(self.exact_matches as f64)
    }

    pub fn report(&self, runtime_seconds: f64) -> MetricsReport {
        MetricsReport {
            example_accuracy: self.example_accuracy(),
            example_f1: self.example_f1(),
            hamming_loss: self.hamming_loss(),
            micro_f1: micro_f1(self),
            macro_f1: macro_f1(self),
            subset_accuracy: self.subset_accuracy(),
            runtime_seconds,
        }
    }
}

fn ratio_or(num: f64, den: f64, empty: f64) -> f64 {
    if den == 0.0 {
        empty
    } else {
        num / den
    }
}

fn check_pair(truth: &Mat, pred: &Mat) -> Result<()> {
    if truth.shape() != pred.shape() {
        return Err(Error::shape(
            "metric",
            format!("{}x{}", truth.rows(), truth.cols()),
            format!("{}x{}", pred.rows(), pred.cols()),
        ));
    }
    Ok(())
}

pub fn hamming_loss(truth: &Mat, pred: &Mat) -> Result<f64> {
    Ok(ConfusionAccumulator::from_batch(truth, pred)?.hamming_loss())
}

/// Mean Jaccard index between true and predicted label sets.
pub fn example_accuracy(truth: &Mat, pred: &Mat) -> Result<f64> {
    Ok(ConfusionAccumulator::from_batch(truth, pred)?.example_accuracy())
}

pub fn example_f1(truth: &Mat, pred: &Mat) -> Result<f64> {
    Ok(ConfusionAccumulator::from_batch(truth, pred)?.example_f1())
}

pub fn subset_accuracy(truth: &Mat, pred: &Mat) -> Result<f64> {
    Ok(ConfusionAccumulator::from_batch(truth, pred)?.subset_accuracy())
}

pub fn micro_f1(acc: &ConfusionAccumulator) -> f64 {
    let tp: u64 = acc.tp.iter().sum();
    let fp: u64 = acc.fp.iter().sum();
    let fn_: u64 = acc.fn_.iter().sum();
    ratio_or(2.0 * tp as f64, (2 * tp + fp + fn_) as f64, 0.0)
}

pub fn macro_f1(acc: &ConfusionAccumulator) -> f64 {
    if acc.labels() == 0 {
        return 0.0;
    }
    let total: f64 = (0..acc.labels())
        .map(|j| {
            let tp = acc.tp[j] as f64;
            ratio_or(2.0 * tp, 2.0 * tp + (acc.fp[j] + acc.fn_[j]) as f64, 0.0)
        })
        .sum();
    total / acc.labels() as f64
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub example_accuracy: f64,
    pub example_f1: f64,
    pub hamming_loss: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub subset_accuracy: f64,
    pub runtime_seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ExampleAccuracy,
    ExampleF1,
    HammingLoss,
    MicroF1,
    MacroF1,
    SubsetAccuracy,
    RuntimeSeconds,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::ExampleAccuracy,
        Metric::ExampleF1,
        Metric::HammingLoss,
        Metric::MicroF1,
        Metric::MacroF1,
        Metric::SubsetAccuracy,
        Metric::RuntimeSeconds,
    ];

    /// The six quality measures, without runtime.
    pub const QUALITY: [Metric; 6] = [
        Metric::ExampleAccuracy,
        Metric::ExampleF1,
        Metric::HammingLoss,
        Metric::MicroF1,
        Metric::MacroF1,
        Metric::SubsetAccuracy,
    ];

    pub fn lower_is_better(self) -> bool {
        matches!(self, Metric::HammingLoss | Metric::RuntimeSeconds)
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::ExampleAccuracy => "example_accuracy",
            Metric::ExampleF1 => "example_f1",
            Metric::HammingLoss => "hamming_loss",
            Metric::MicroF1 => "micro_f1",
            Metric::MacroF1 => "macro_f1",
            Metric::SubsetAccuracy => "subset_accuracy",
            Metric::RuntimeSeconds => "runtime_seconds",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric `{s}`")))
    }
}

impl MetricsReport {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::ExampleAccuracy => self.example_accuracy,
            Metric::ExampleF1 => self.example_f1,
            Metric::HammingLoss => self.hamming_loss,
            Metric::MicroF1 => self.micro_f1,
            Metric::MacroF1 => self.macro_f1,
            Metric::SubsetAccuracy => self.subset_accuracy,
            Metric::RuntimeSeconds => self.runtime_seconds,
        }
    }

    pub fn set(&mut self, metric: Metric, value: f64) {
        let slot = match metric {
            Metric::ExampleAccuracy => &mut self.example_accuracy,
            Metric::ExampleF1 => &mut self.example_f1,
            Metric::HammingLoss => &mut self.hamming_loss,
            Metric::MicroF1 => &mut self.micro_f1,
            Metric::MacroF1 => &mut self.macro_f1,
            Metric::SubsetAccuracy => &mut self.subset_accuracy,
            Metric::RuntimeSeconds => &mut self.runtime_seconds,
        };
        *slot = value;
    }

    fn from_fn(f: impl Fn(Metric) -> f64) -> Self {
        let mut r = MetricsReport::default();
        for m in Metric::ALL {
            r.set(m, f(m));
        }
        r
    }
}

/// Per-metric mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: MetricsReport,
    pub std: MetricsReport,
    pub count: usize,
}

/// Mean and sample (n − 1) standard deviation of every field. A single
/// report has zero deviation; an empty slice yields zeros.
pub fn aggregate(reports: &[MetricsReport]) -> Aggregate {
    let n = reports.len();
    let mean = MetricsReport::from_fn(|m| {
        if n == 0 {
            0.0
        } else {
            reports.iter().map(|r| r.get(m)).sum::<f64>() / n as f64
        }
    });
    let std = MetricsReport::from_fn(|m| {
        if n < 2 {
            return 0.0;
        }
        let mu = mean.get(m);
        let ss: f64 = reports.iter().map(|r| (r.get(m) - mu).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    Aggregate {
        mean,
        std,
        count: n,
    }
}

/// Competition ranks (1 = best); equal values share the smallest rank.
pub fn competition_ranks(values: &[f64], lower_is_better: bool) -> Vec<usize> {
    values
        .iter()
        .map(|&v| {
            1 + values
                .iter()
                .filter(|&&o| if lower_is_better { o < v } else { o > v })
                .count()
        })
        .collect()
}
