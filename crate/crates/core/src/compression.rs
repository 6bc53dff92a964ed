//! Random label compression with a recursively updated least-squares decoder.
//!
//! Labels are projected onto `k` random orthonormal directions, base
//! learners are trained on the projected (pseudo) labels, and a `k x l`
//! decoder maps their predictions back to the original label space. The
//! decoder is refreshed after every batch with the Woodbury identity, so no
//! past data has to be kept.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::StreamLearner;
use crate::error::{Error, Result};
use crate::learners::{BinaryRelevance, FeatureKind, DEFAULT_LEARNING_RATE};
use crate::linalg::{
    batch_least_squares, gram_schmidt_with, rls_update_blocked, Mat, RlsState, DEFAULT_RIDGE,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "cls-fixed")]
    ClsFixed,
    #[serde(rename = "cls-adaptive")]
    ClsAdaptive,
    #[serde(rename = "reg-fixed")]
    RegFixed,
    #[serde(rename = "reg-adaptive")]
    RegAdaptive,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::ClsFixed,
        Variant::ClsAdaptive,
        Variant::RegFixed,
        Variant::RegAdaptive,
    ];

    pub fn is_classification(self) -> bool {
        matches!(self, Variant::ClsFixed | Variant::ClsAdaptive)
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, Variant::ClsAdaptive | Variant::RegAdaptive)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::ClsFixed => "cls-fixed",
            Variant::ClsAdaptive => "cls-adaptive",
            Variant::RegFixed => "reg-fixed",
            Variant::RegAdaptive => "reg-adaptive",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant `{s}`")))
    }
}

/// `⌈log₂ l⌉`, at least 1.
pub fn default_reduced_size(labels: usize) -> usize {
    if labels <= 2 {
        return 1;
    }
    (usize::BITS - (labels - 1).leading_zeros()) as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaceConfig {
    /// Original label count `l`.
    pub labels: usize,
    /// Reduced label count `k`.
    pub reduced: usize,
    pub variant: Variant,
    pub seed: u64,
    pub ridge: f64,
    pub decode_threshold: f64,
    /// Feed naive Bayes posteriors instead of hard labels to the decoder.
    pub soft_predictions: bool,
    pub learning_rate: f64,
    /// Row block size for the decoder update; `None` uses `k`.
    pub decoder_block: Option<usize>,
}

impl RaceConfig {
    pub fn new(labels: usize, variant: Variant, seed: u64) -> Self {
        RaceConfig {
            labels,
            reduced: default_reduced_size(labels),
            variant,
            seed,
            ridge: DEFAULT_RIDGE,
            decode_threshold: 0.0,
            soft_predictions: false,
            learning_rate: DEFAULT_LEARNING_RATE,
            decoder_block: None,
        }
    }

    pub fn with_reduced(mut self, k: usize) -> Self {
        self.reduced = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.reduced == 0 || self.reduced > self.labels {
            return Err(Error::InvalidArgument(format!(
                "reduced size k={} must satisfy 1 <= k <= l={}",
                self.reduced, self.labels
            )));
        }
        if self.decoder_block == Some(0) {
            return Err(Error::InvalidArgument("decoder block must be >= 1".into()));
        }
        Ok(())
    }

    fn block_rows(&self) -> usize {
        self.decoder_block.unwrap_or(self.reduced)
    }
}

/// Draws `k` vectors uniform on `[-1, 1]^l` and orthonormalizes them.
pub fn init_encoder(l: usize, k: usize, seed: u64) -> Result<Mat> {
    if k == 0 || k > l {
        return Err(Error::InvalidArgument(format!(
            "encoder needs 1 <= k <= l, got k={k}, l={l}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = move || -> Vec<f64> { (0..l).map(|_| rng.random_range(-1.0..=1.0)).collect() };
    let columns: Vec<Vec<f64>> = (0..k).map(|_| draw()).collect();
    gram_schmidt_with(&columns, |_, _| Ok(draw()))
}

/// Pseudo labels `H = L A`.
pub fn encode(labels: &Mat, encoder: &Mat) -> Result<Mat> {
    labels.matmul(encoder)
}

/// Maps entries `>= 0` to 1 and the rest to 0.
pub fn binarize(h: &Mat) -> Mat {
    h.map(|v| if v >= 0.0 { 1.0 } else { 0.0 })
}

/// Raw decoded scores `P β`.
pub fn decode_raw(p: &Mat, beta: &Mat) -> Result<Mat> {
    p.matmul(beta)
}

/// Decoded labels: 1 where `P β >= threshold`.
pub fn decode(p: &Mat, beta: &Mat, threshold: f64) -> Result<Mat> {
    Ok(decode_raw(p, beta)?.map(|v| if v >= threshold { 1.0 } else { 0.0 }))
}

/// Anything that can be trained on and predict a block of pseudo labels.
pub trait PseudoLabelModel {
    fn predict(&self, x: &Mat) -> Result<Mat>;
    fn update(&mut self, x: &Mat, targets: &Mat) -> Result<()>;
}

impl PseudoLabelModel for BinaryRelevance {
    fn predict(&self, x: &Mat) -> Result<Mat> {
        BinaryRelevance::predict(self, x)
    }

    fn update(&mut self, x: &Mat, targets: &Mat) -> Result<()> {
        BinaryRelevance::update(self, x, targets)
    }
}

/// Base learners matching the variant: naive Bayes for classification,
/// SGD regressors otherwise.
pub fn default_learners(config: &RaceConfig, schema: &[FeatureKind]) -> BinaryRelevance {
    if config.variant.is_classification() {
        BinaryRelevance::classification(schema, config.reduced)
            .with_soft_predictions(config.soft_predictions)
    } else {
        BinaryRelevance::regression(schema.len(), config.reduced, config.learning_rate)
    }
}

#[derive(Clone, Debug)]
pub struct RaceState<M = BinaryRelevance> {
    config: RaceConfig,
    encoder: Mat,
    decoder: RlsState,
    learners: M,
    batches_seen: usize,
}

impl RaceState<BinaryRelevance> {
    /// Initializes from the first batch with the default base learners.
    pub fn init(config: RaceConfig, schema: &[FeatureKind], x: &Mat, labels: &Mat) -> Result<Self> {
        config.validate()?;
        let learners = default_learners(&config, schema);
        RaceState::init_with(config, learners, x, labels)
    }
}

impl<M: PseudoLabelModel> RaceState<M> {
    /// Initialization step: generate the encoder, train the learners on the
    /// first batch's pseudo labels and solve the decoder on the same
    /// pseudo labels.
    pub fn init_with(config: RaceConfig, mut learners: M, x: &Mat, labels: &Mat) -> Result<Self> {
        config.validate()?;
        if labels.rows() == 0 {
            return Err(Error::InvalidArgument(
                "the initialization batch is empty".into(),
            ));
        }
        check_batch(&config, x, labels)?;
        let encoder = init_encoder(config.labels, config.reduced, config.seed)?;
        let h = pseudo_labels(&config, labels, &encoder)?;
        learners.update(x, &h)?;
        let decoder = batch_least_squares(&h, labels, config.ridge)?;
        Ok(RaceState {
            config,
            encoder,
            decoder,
            learners,
            batches_seen: 1,
        })
    }

    pub fn config(&self) -> &RaceConfig {
        &self.config
    }

    pub fn encoder(&self) -> &Mat {
        &self.encoder
    }

    pub fn decoder(&self) -> &RlsState {
        &self.decoder
    }

    pub fn learners(&self) -> &M {
        &self.learners
    }

    pub fn batches_seen(&self) -> usize {
        self.batches_seen
    }

    /// Pseudo-label predictions of the base learners.
    pub fn predict_pseudo(&self, x: &Mat) -> Result<Mat> {
        if x.rows() == 0 {
            return Ok(Mat::zeros(0, self.config.reduced));
        }
        self.learners.predict(x)
    }

    /// Undecided decoder scores `P β` for `x`.
    pub fn predict_raw(&self, x: &Mat) -> Result<Mat> {
        let p = self.predict_pseudo(x)?;
        if p.rows() == 0 {
            return Ok(Mat::zeros(0, self.config.labels));
        }
        decode_raw(&p, &self.decoder.beta)
    }

    /// Test step: binary label predictions from the current model.
    pub fn predict(&self, x: &Mat) -> Result<Mat> {
        let threshold = self.config.decode_threshold;
        Ok(self
            .predict_raw(x)?
            .map(|v| if v >= threshold { 1.0 } else { 0.0 }))
    }

    /// Replaces the encoder with the transpose of the current decoder.
    pub fn adapt_encoder(&mut self) -> Result<()> {
        if !self.config.variant.is_adaptive() {
            return Err(Error::Contract(format!(
                "adapt_encoder called on fixed variant {}",
                self.config.variant
            )));
        }
        self.encoder = self.decoder.beta.transpose();
        Ok(())
    }

    /// Update step: adapt the encoder (adaptive variants), encode the true
    /// labels, update the learners, then the decoder.
    pub fn train(&mut self, x: &Mat, labels: &Mat) -> Result<()> {
        check_batch(&self.config, x, labels)?;
        if labels.rows() == 0 {
            return Ok(());
        }
        if self.config.variant.is_adaptive() {
            self.adapt_encoder()?;
        }
        let h = pseudo_labels(&self.config, labels, &self.encoder)?;
        self.learners.update(x, &h)?;
        rls_update_blocked(&mut self.decoder, &h, labels, self.config.block_rows())?;
        self.batches_seen += 1;
        Ok(())
    }

    /// Test-then-train on one batch; the returned predictions come from the
    /// model as it was before this batch.
    pub fn process_batch(&mut self, x: &Mat, labels: &Mat) -> Result<Mat> {
        check_batch(&self.config, x, labels)?;
        let y = self.predict(x)?;
        self.train(x, labels)?;
        Ok(y)
    }
}

/// [`RaceState`] behind the common stream interface; the first training
/// batch runs the initialization step.
#[derive(Clone, Debug)]
pub struct Race {
    config: RaceConfig,
    schema: Vec<FeatureKind>,
    state: Option<RaceState>,
}

impl Race {
    pub fn new(config: RaceConfig, schema: &[FeatureKind]) -> Result<Self> {
        config.validate()?;
        Ok(Race {
            config,
            schema: schema.to_vec(),
            state: None,
        })
    }

    pub fn state(&self) -> Option<&RaceState> {
        self.state.as_ref()
    }
}

impl StreamLearner for Race {
    fn name(&self) -> String {
        format!("RACE({})", self.config.variant)
    }

    fn predict(&mut self, x: &Mat) -> Result<Mat> {
        match &self.state {
            Some(state) => state.predict(x),
            None => Err(Error::Untrained),
        }
    }

    fn train(&mut self, x: &Mat, labels: &Mat) -> Result<()> {
        match &mut self.state {
            Some(state) => state.train(x, labels),
            None if labels.rows() == 0 => Ok(()),
            None => {
                self.state = Some(RaceState::init(
                    self.config.clone(),
                    &self.schema,
                    x,
                    labels,
                )?);
                Ok(())
            }
        }
    }
}

fn pseudo_labels(config: &RaceConfig, labels: &Mat, encoder: &Mat) -> Result<Mat> {
    let h = encode(labels, encoder)?;
    Ok(if config.variant.is_classification() {
        binarize(&h)
    } else {
        h
    })
}

fn check_batch(config: &RaceConfig, x: &Mat, labels: &Mat) -> Result<()> {
    if labels.rows() != x.rows() {
        return Err(Error::shape(
            "race batch",
            format!("{} label rows", x.rows()),
            labels.rows(),
        ));
    }
    if labels.rows() > 0 && labels.cols() != config.labels {
        return Err(Error::shape(
            "race batch",
            format!("{} labels", config.labels),
            labels.cols(),
        ));
    }
    Ok(())
}
