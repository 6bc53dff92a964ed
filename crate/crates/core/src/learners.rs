//! Incremental single-target base learners and the Binary Relevance wrapper.
//!
//! Feature rows are plain `&[f64]`. `NaN` marks a missing value; naive
//! Bayes skips those entries, the SGD regressor rejects them. Nominal
//! features carry the index of their value.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Floor applied to Gaussian variances before they enter a density.
pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Learning rate used for the regression variants.
pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;

/// Snapshot format version written by [`BinaryRelevance::to_json`].
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric,
    /// Categorical feature with `values` distinct levels, encoded `0..values`.
    Nominal { values: usize },
}

/// Running count, mean and sum of squared deviations (Welford).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GaussianStat {
    pub count: f64,
    pub mean: f64,
    pub m2: f64,
}

impl GaussianStat {
    pub fn update(&mut self, x: f64) {
        self.count += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (x - self.mean);
    }

    /// Sample variance, floored. A single observation gets the floor.
    pub fn variance(&self) -> f64 {
        if self.count < 2.0 {
            return VARIANCE_FLOOR;
        }
        (self.m2 / (self.count - 1.0)).max(VARIANCE_FLOOR)
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let var = self.variance();
        let d = x - self.mean;
        -0.5 * ((2.0 * PI * var).ln() + d * d / var)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum FeatureStats {
    Gaussian([GaussianStat; 2]),
    /// Per-class value counts plus the number of non-missing observations.
    Nominal { counts: [Vec<f64>; 2], seen: [f64; 2] },
}

/// Updateable two-class naive Bayes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    class_counts: [f64; 2],
    features: Vec<FeatureStats>,
}

impl NaiveBayes {
    pub fn new(schema: &[FeatureKind]) -> Self {
        let features = schema
            .iter()
            .map(|kind| match *kind {
                FeatureKind::Numeric => FeatureStats::Gaussian([GaussianStat::default(); 2]),
                FeatureKind::Nominal { values } => FeatureStats::Nominal {
                    counts: [vec![0.0; values], vec![0.0; values]],
                    seen: [0.0; 2],
                },
            })
            .collect();
        NaiveBayes {
            class_counts: [0.0; 2],
            features,
        }
    }

    pub fn arity(&self) -> usize {
        self.features.len()
    }

    pub fn class_counts(&self) -> [f64; 2] {
        self.class_counts
    }

    pub fn is_trained(&self) -> bool {
        self.class_counts[0] + self.class_counts[1] > 0.0
    }

    /// Gaussian statistics of feature `feature` for class `class`, if numeric.
    pub fn gaussian(&self, feature: usize, class: usize) -> Option<&GaussianStat> {
        match &self.features[feature] {
            FeatureStats::Gaussian(stats) => Some(&stats[class]),
            FeatureStats::Nominal { .. } => None,
        }
    }

    fn check_arity(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.features.len() {
            return Err(Error::shape(
                "naive bayes",
                format!("{} features", self.features.len()),
                x.len(),
            ));
        }
        Ok(())
    }

    pub fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        self.check_arity(x)?;
        let class = match y {
            v if v == 0.0 => 0,
            v if v == 1.0 => 1,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "naive bayes target must be 0 or 1, got {other}"
                )))
            }
        };
        self.class_counts[class] += 1.0;
        for (stats, &v) in self.features.iter_mut().zip(x) {
            if v.is_nan() {
                continue;
            }
            match stats {
                FeatureStats::Gaussian(g) => g[class].update(v),
                FeatureStats::Nominal { counts, seen } => {
                    let idx = v as usize;
                    if v < 0.0 || v.fract() != 0.0 || idx >= counts[class].len() {
                        return Err(Error::InvalidArgument(format!(
                            "nominal value {v} out of range 0..{}",
                            counts[class].len()
                        )));
                    }
                    counts[class][idx] += 1.0;
                    seen[class] += 1.0;
                }
            }
        }
        Ok(())
    }

    /// Unnormalized log posteriors `[log p(0,x), log p(1,x)]`.
    ///
    /// Priors are Laplace smoothed. While one class is still unseen only the
    /// priors are compared.
    pub fn log_joint(&self, x: &[f64]) -> Result<[f64; 2]> {
        if !self.is_trained() {
            return Err(Error::Untrained);
        }
        self.check_arity(x)?;
        let total = self.class_counts[0] + self.class_counts[1];
        let mut scores = [
            ((self.class_counts[0] + 1.0) / (total + 2.0)).ln(),
            ((self.class_counts[1] + 1.0) / (total + 2.0)).ln(),
        ];
        if self.class_counts.iter().any(|&c| c == 0.0) {
            return Ok(scores);
        }
        for (stats, &v) in self.features.iter().zip(x) {
            if v.is_nan() {
                continue;
            }
            match stats {
                FeatureStats::Gaussian(g) => {
                    for (c, s) in scores.iter_mut().enumerate() {
                        *s += g[c].log_density(v);
                    }
                }
                FeatureStats::Nominal { counts, seen } => {
                    let levels = counts[0].len() as f64;
                    let idx = v as usize;
                    for (c, s) in scores.iter_mut().enumerate() {
                        let count = counts[c].get(idx).copied().unwrap_or(0.0);
                        *s += ((count + 1.0) / (seen[c] + levels)).ln();
                    }
                }
            }
        }
        Ok(scores)
    }

    /// Hard label (ties go to 0) and posterior probability of label 1.
    pub fn predict(&self, x: &[f64]) -> Result<(u8, f64)> {
        let [s0, s1] = self.log_joint(x)?;
        let posterior = 1.0 / (1.0 + (s0 - s1).exp());
        let label = u8::from(s1 > s0);
        Ok((label, posterior))
    }
}

/// Linear regressor trained with plain squared-loss SGD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdRegressor {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub learning_rate: f64,
}

impl SgdRegressor {
    pub fn new(arity: usize, learning_rate: f64) -> Self {
        SgdRegressor {
            weights: vec![0.0; arity],
            bias: 0.0,
            learning_rate,
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.weights.len() {
            return Err(Error::shape(
                "sgd regressor",
                format!("{} features", self.weights.len()),
                x.len(),
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sgd feature vector"));
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(crate::linalg::dot(&self.weights, x) + self.bias)
    }

    pub fn update(&mut self, x: &[f64], target: f64) -> Result<()> {
        if !target.is_finite() {
            return Err(Error::NonFinite("sgd target"));
        }
        let err = self.predict(x)? - target;
        let step = self.learning_rate * err;
        for (w, &xi) in self.weights.iter_mut().zip(x) {
            *w -= step * xi;
        }
        self.bias -= step;
        if !self.bias.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("sgd weights"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetMode {
    /// Naive Bayes per target. With `soft`, predictions are posteriors.
    Classification { soft: bool },
    /// SGD regressor per target.
    Regression,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Learner {
    NaiveBayes(NaiveBayes),
    Sgd(SgdRegressor),
}

/// One independent learner per target column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryRelevance {
    mode: TargetMode,
    arity: usize,
    learners: Vec<Learner>,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    version: u32,
    model: BinaryRelevance,
}

impl BinaryRelevance {
    pub fn classification(schema: &[FeatureKind], targets: usize) -> Self {
        BinaryRelevance {
            mode: TargetMode::Classification { soft: false },
            arity: schema.len(),
            learners: (0..targets)
                .map(|_| Learner::NaiveBayes(NaiveBayes::new(schema)))
                .collect(),
        }
    }

    pub fn regression(arity: usize, targets: usize, learning_rate: f64) -> Self {
        BinaryRelevance {
            mode: TargetMode::Regression,
            arity,
            learners: (0..targets)
                .map(|_| Learner::Sgd(SgdRegressor::new(arity, learning_rate)))
                .collect(),
        }
    }

    /// Switches classification output to posteriors. No effect on regression.
    pub fn with_soft_predictions(mut self, soft: bool) -> Self {
        if let TargetMode::Classification { .. } = self.mode {
            self.mode = TargetMode::Classification { soft };
        }
        self
    }

    pub fn mode(&self) -> TargetMode {
        self.mode
    }

    pub fn targets(&self) -> usize {
        self.learners.len()
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    fn check(&self, x: &Mat, t: Option<&Mat>) -> Result<()> {
        if x.cols() != self.arity {
            return Err(Error::shape(
                "binary relevance features",
                format!("{} columns", self.arity),
                x.cols(),
            ));
        }
        if let Some(t) = t {
            if t.cols() != self.learners.len() || t.rows() != x.rows() {
                return Err(Error::shape(
                    "binary relevance targets",
                    format!("{}x{}", x.rows(), self.learners.len()),
                    format!("{}x{}", t.rows(), t.cols()),
                ));
            }
            if matches!(self.mode, TargetMode::Classification { .. })
                && t.as_slice().iter().any(|&v| v != 0.0 && v != 1.0)
            {
                return Err(Error::InvalidArgument(
                    "classification targets must be binary".into(),
                ));
            }
        }
        Ok(())
    }

    /// Updates learner `j` with column `j` of `targets`, row by row.
    pub fn update(&mut self, x: &Mat, targets: &Mat) -> Result<()> {
        self.check(x, Some(targets))?;
        for (i, row) in x.row_iter().enumerate() {
            let t = targets.row(i);
            for (learner, &target) in self.learners.iter_mut().zip(t) {
                match learner {
                    Learner::NaiveBayes(nb) => nb.update(row, target)?,
                    Learner::Sgd(sgd) => sgd.update(row, target)?,
                }
            }
        }
        Ok(())
    }

    pub fn predict(&self, x: &Mat) -> Result<Mat> {
        self.check(x, None)?;
        let soft = matches!(self.mode, TargetMode::Classification { soft: true });
        let mut out = Mat::zeros(x.rows(), self.learners.len());
        for (i, row) in x.row_iter().enumerate() {
            for (j, learner) in self.learners.iter().enumerate() {
                out[(i, j)] = match learner {
                    Learner::NaiveBayes(nb) => {
                        let (label, posterior) = nb.predict(row)?;
                        if soft {
                            posterior
                        } else {
                            f64::from(label)
                        }
                    }
                    Learner::Sgd(sgd) => sgd.predict(row)?,
                };
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Snapshot {
            version: SNAPSHOT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: Snapshot = serde_json::from_str(text)?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported snapshot version {}",
                snap.version
            )));
        }
        Ok(snap.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NUMERIC1: [FeatureKind; 1] = [FeatureKind::Numeric];

    #[test]
    fn welford_by_hand() {
        let mut nb = NaiveBayes::new(&NUMERIC1);
        nb.update(&[1.0], 1.0).unwrap();
        nb.update(&[3.0], 1.0).unwrap();
        let g = nb.gaussian(0, 1).unwrap();
        assert_eq!(g.mean, 2.0);
        assert_eq!(g.m2, 2.0);
        assert_eq!(g.variance(), 2.0);
    }

    #[test]
    fn single_observation_uses_floor() {
        let mut g = GaussianStat::default();
        g.update(4.0);
        assert_eq!(g.variance(), VARIANCE_FLOOR);
    }

    #[test]
    fn rejects_non_binary_target() {
        let mut nb = NaiveBayes::new(&NUMERIC1);
        assert!(nb.update(&[1.0], 2.0).is_err());
        assert!(nb.update(&[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn untrained_predict_errors() {
        let nb = NaiveBayes::new(&NUMERIC1);
        assert!(matches!(nb.predict(&[0.0]), Err(Error::Untrained)));
    }

    #[test]
    fn symmetric_data_ties_to_zero() {
        let mut nb = NaiveBayes::new(&NUMERIC1);
        for (x, y) in [(-1.0, 0.0), (-3.0, 0.0), (1.0, 1.0), (3.0, 1.0)] {
            nb.update(&[x], y).unwrap();
        }
        let (label, posterior) = nb.predict(&[0.0]).unwrap();
        assert!((posterior - 0.5).abs() < 1e-9);
        assert_eq!(label, 0);
    }

    #[test]
    fn single_class_prior_dominates() {
        let mut nb = NaiveBayes::new(&NUMERIC1);
        for x in [0.0, 0.0, 0.0] {
            nb.update(&[x], 1.0).unwrap();
        }
        for x in [-1e6, 0.0, 42.0] {
            assert_eq!(nb.predict(&[x]).unwrap().0, 1);
        }
    }

    #[test]
    fn two_point_gaussian_toy() {
        // Floored variances make the density ratio astronomically in favour
        // of the nearer mean: (1-0)^2 < (1-10)^2.
        let mut nb = NaiveBayes::new(&NUMERIC1);
        nb.update(&[0.0], 0.0).unwrap();
        nb.update(&[10.0], 1.0).unwrap();
        let (label, posterior) = nb.predict(&[1.0]).unwrap();
        assert_eq!(label, 0);
        assert!(posterior < 1e-12);
    }

    #[test]
    fn nominal_features_use_laplace_frequencies() {
        let schema = [FeatureKind::Nominal { values: 3 }];
        let mut nb = NaiveBayes::new(&schema);
        for (x, y) in [(0.0, 0.0), (0.0, 0.0), (2.0, 1.0), (2.0, 1.0), (1.0, 1.0)] {
            nb.update(&[x], y).unwrap();
        }
        let [s0, s1] = nb.log_joint(&[2.0]).unwrap();
        let p0: f64 = (3.0 / 7.0) * (1.0 / 5.0);
        let p1: f64 = (4.0 / 7.0) * (3.0 / 6.0);
        assert!((s0 - p0.ln()).abs() < 1e-12);
        assert!((s1 - p1.ln()).abs() < 1e-12);
        assert!(nb.update(&[3.0], 0.0).is_err());
    }

    #[test]
    fn missing_values_are_skipped() {
        let schema = [FeatureKind::Numeric, FeatureKind::Numeric];
        let mut nb = NaiveBayes::new(&schema);
        nb.update(&[1.0, f64::NAN], 1.0).unwrap();
        nb.update(&[3.0, 5.0], 1.0).unwrap();
        assert_eq!(nb.gaussian(1, 1).unwrap().count, 1.0);
        nb.update(&[0.0, 0.0], 0.0).unwrap();
        assert!(nb.predict(&[2.0, f64::NAN]).is_ok());
    }

    #[test]
    fn sgd_zero_gradient() {
        let mut sgd = SgdRegressor::new(2, 0.1);
        sgd.weights = vec![1.0, -1.0];
        sgd.bias = 0.5;
        let before = sgd.clone();
        let target = sgd.predict(&[2.0, 1.0]).unwrap();
        sgd.update(&[2.0, 1.0], target).unwrap();
        assert_eq!(sgd, before);
    }

    #[test]
    fn sgd_one_step_by_hand() {
        let mut sgd = SgdRegressor::new(1, 0.1);
        sgd.update(&[1.0], 1.0).unwrap();
        assert!((sgd.weights[0] - 0.1).abs() < 1e-15);
        assert!((sgd.bias - 0.1).abs() < 1e-15);
    }

    #[test]
    fn sgd_frozen_with_zero_rate() {
        let mut sgd = SgdRegressor::new(2, 0.0);
        sgd.update(&[3.0, 4.0], 10.0).unwrap();
        assert_eq!(sgd.weights, vec![0.0, 0.0]);
        assert_eq!(sgd.bias, 0.0);
    }

    #[test]
    fn sgd_predict_cases() {
        let sgd = SgdRegressor::new(1, 0.1);
        assert_eq!(sgd.predict(&[5.0]).unwrap(), 0.0);
        let sgd = SgdRegressor {
            weights: vec![2.0],
            bias: 1.0,
            learning_rate: 0.1,
        };
        assert_eq!(sgd.predict(&[3.0]).unwrap(), 7.0);
        assert!(sgd.predict(&[3.0, 1.0]).is_err());
        let mut sgd = sgd;
        assert!(sgd.update(&[f64::INFINITY], 1.0).is_err());
        assert!(sgd.update(&[1.0], f64::NAN).is_err());
    }

    fn toy_batch() -> (Mat, Mat) {
        let x = Mat::from_rows(&[[0.1, 1.0], [2.0, -1.0], [0.3, 0.8], [1.9, -1.2], [0.0, 0.9]])
            .unwrap();
        let t = Mat::from_rows(&[[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 1.0]])
            .unwrap();
        (x, t)
    }

    #[test]
    fn br_single_target_matches_single_learner() {
        let schema = [FeatureKind::Numeric; 2];
        let (x, t) = toy_batch();
        let col = Mat::from_columns(&[t.column(0)]).unwrap();
        let mut br = BinaryRelevance::classification(&schema, 1);
        br.update(&x, &col).unwrap();
        let mut nb = NaiveBayes::new(&schema);
        for (i, row) in x.row_iter().enumerate() {
            nb.update(row, col[(i, 0)]).unwrap();
        }
        let p = br.predict(&x).unwrap();
        for (i, row) in x.row_iter().enumerate() {
            assert_eq!(p[(i, 0)], f64::from(nb.predict(row).unwrap().0));
        }
    }

    #[test]
    fn br_column_permutation_is_equivariant() {
        let schema = [FeatureKind::Numeric; 2];
        let (x, t) = toy_batch();
        let perm = [2, 0, 1];
        let permuted = Mat::from_fn(t.rows(), 3, |i, j| t[(i, perm[j])]);
        for mut br in [
            BinaryRelevance::classification(&schema, 3).with_soft_predictions(true),
            BinaryRelevance::regression(2, 3, 0.05),
        ] {
            let mut br_p = br.clone();
            br.update(&x, &t).unwrap();
            br_p.update(&x, &permuted).unwrap();
            let p = br.predict(&x).unwrap();
            let pp = br_p.predict(&x).unwrap();
            for i in 0..x.rows() {
                for j in 0..3 {
                    assert_eq!(pp[(i, j)], p[(i, perm[j])]);
                }
            }
        }
    }

    #[test]
    fn br_rejects_mismatches() {
        let schema = [FeatureKind::Numeric; 2];
        let (x, t) = toy_batch();
        let mut br = BinaryRelevance::classification(&schema, 2);
        assert!(br.update(&x, &t).is_err());
        let mut br = BinaryRelevance::classification(&schema, 3);
        assert!(br.update(&x, &t.scale(0.5)).is_err());
        assert!(br.predict(&Mat::zeros(1, 3)).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let schema = [FeatureKind::Numeric, FeatureKind::Nominal { values: 2 }];
        let x = Mat::from_rows(&[[0.5, 0.0], [1.5, 1.0], [0.2, 1.0]]).unwrap();
        let t = Mat::from_rows(&[[0.0, 1.0], [1.0, 1.0], [0.0, 0.0]]).unwrap();
        let mut br = BinaryRelevance::classification(&schema, 2);
        br.update(&x, &t).unwrap();
        let back = BinaryRelevance::from_json(&br.to_json().unwrap()).unwrap();
        assert_eq!(back, br);
        assert_eq!(back.predict(&x).unwrap(), br.predict(&x).unwrap());
        let bad = br.to_json().unwrap().replace("\"version\":1", "\"version\":9");
        assert!(BinaryRelevance::from_json(&bad).is_err());
    }
}
