//! Comparison methods sharing the test-then-train interface: online binary
//! relevance, an online ensemble of classifier chains, and the Majority and
//! Negative reference predictors.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::learners::{BinaryRelevance, FeatureKind, NaiveBayes};
use crate::linalg::Mat;

pub const DEFAULT_ENSEMBLE_SIZE: usize = 5;

/// A multi-label learner consumed batch by batch.
pub trait StreamLearner {
    /// Short descriptor used in reports.
    fn name(&self) -> String;

    /// Predicts a binary `n x l` label matrix with the current model.
    fn predict(&mut self, x: &Mat) -> Result<Mat>;

    /// Trains on a labelled batch. The first call initializes the model.
    fn train(&mut self, x: &Mat, labels: &Mat) -> Result<()>;

    /// Test-then-train: predictions never see `labels`.
    fn process_batch(&mut self, x: &Mat, labels: &Mat) -> Result<Mat> {
        let y = self.predict(x)?;
        self.train(x, labels)?;
        Ok(y)
    }
}

fn check_labels(labels: &Mat, x: &Mat, l: usize) -> Result<()> {
    if labels.rows() != x.rows() || (labels.rows() > 0 && labels.cols() != l) {
        return Err(Error::shape(
            "label batch",
            format!("{}x{l}", x.rows()),
            format!("{}x{}", labels.rows(), labels.cols()),
        ));
    }
    Ok(())
}

/// Predicts no label, ever.
#[derive(Clone, Debug)]
pub struct Negative {
    labels: usize,
}

impl Negative {
    pub fn new(labels: usize) -> Self {
        Negative { labels }
    }
}

impl StreamLearner for Negative {
    fn name(&self) -> String {
        "Negative".into()
    }

    fn predict(&mut self, x: &Mat) -> Result<Mat> {
        Ok(Mat::zeros(x.rows(), self.labels))
    }

    fn train(&mut self, x: &Mat, labels: &Mat) -> Result<()> {
        check_labels(labels, x, self.labels)
    }
}

/// Predicts the `⌊c⌋` most frequent labels for every instance, where `c` is
/// the label cardinality of the previous training batch.
#[derive(Clone, Debug)]
pub struct Majority {
    cardinality: Option<f64>,
    counts: Vec<f64>,
}

impl Majority {
    pub fn new(labels: usize) -> Self {
        Majority {
            cardinality: None,
            counts: vec![0.0; labels],
        }
    }

    pub fn cardinality(&self) -> Option<f64> {
        self.cardinality
    }

    /// Label indices predicted positive, best first.
    pub fn top_labels(&self) -> Vec<usize> {
        let Some(c) = self.cardinality else {
            return Vec::new();
        };
        let take = (c.floor().max(0.0) as usize).min(self.counts.len());
        let mut order: Vec<usize> = (0..self.counts.len()).collect();
        order.sort_by(|&a, &b| self.counts[b].total_cmp(&self.counts[a]).then(a.cmp(&b)));
        order.truncate(take);
        order
    }
}

impl StreamLearner for Majority {
    fn name(&self) -> String {
        "Majority".into()
    }

    fn predict(&mut self, x: &Mat) -> Result<Mat> {
        let mut y = Mat::zeros(x.rows(), self.counts.len());
        let top = self.top_labels();
        for i in 0..x.rows() {
            for &j in &top {
                y[(i, j)] = 1.0;
            }
        }
        Ok(y)
    }

    fn train(&mut self, x: &Mat, labels: &Mat) -> Result<()> {
        check_labels(labels, x, self.counts.len())?;
        if labels.rows() == 0 {
            return Ok(());
        }
        let mut total = 0.0;
        for row in labels.row_iter() {
            for (c, &v) in self.counts.iter_mut().zip(row) {
                *c += v;
                total += v;
            }
        }
        self.cardinality = Some(total / labels.rows() as f64);
        Ok(())
    }
}

/// One naive Bayes classifier per original label.
#[derive(Clone, Debug)]
pub struct Obr {
    model: BinaryRelevance,
}

impl Obr {
    pub fn new(schema: &[FeatureKind], labels: usize) -> Self {
        Obr {
            model: BinaryRelevance::classification(schema, labels),
        }
    }
}

impl StreamLearner for Obr {
    fn name(&self) -> String {
        "OBR".into()
    }

    fn predict(&mut self, x: &Mat) -> Result<Mat> {
        if x.rows() == 0 {
            return Ok(Mat::zeros(0, self.model.targets()));
        }
        self.model.predict(x)
    }

    fn train(&mut self, x: &Mat, labels: &Mat) -> Result<()> {
        check_labels(labels, x, self.model.targets())?;
        if labels.rows() == 0 {
            return Ok(());
        }
        self.model.update(x, labels)
    }
}

/// A classifier chain: link `j` sees the features plus the labels of links
/// `0..j` in chain order.
#[derive(Clone, Debug)]
pub struct Chain {
    order: Vec<usize>,
    links: Vec<NaiveBayes>,
    features: usize,
}

impl Chain {
    pub fn new(schema: &[FeatureKind], order: Vec<usize>) -> Self {
        let mut link_schema = schema.to_vec();
        let mut links = Vec::with_capacity(order.len());
        for _ in 0..order.len() {
            links.push(NaiveBayes::new(&link_schema));
            link_schema.push(FeatureKind::Nominal { values: 2 });
        }
        Chain {
            order,
            links,
            features: schema.len(),
        }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    fn check_features(&self, x: &Mat) -> Result<()> {
        if x.cols() != self.features {
            return Err(Error::shape(
                "classifier chain",
                format!("{} features", self.features),
                x.cols(),
            ));
        }
        Ok(())
    }

    /// Predicts with each link fed the hard predictions of its predecessors.
    pub fn predict(&self, x: &Mat) -> Result<Mat> {
        self.check_features(x)?;
        let l = self.order.len();
        let mut y = Mat::zeros(x.rows(), l);
        let mut row = Vec::with_capacity(self.features + l);
        for (i, xi) in x.row_iter().enumerate() {
            row.clear();
            row.extend_from_slice(xi);
            for (link, &label) in self.links.iter().zip(&self.order) {
                let (pred, _) = link.predict(&row)?;
                let pred = f64::from(pred);
                row.push(pred);
                y[(i, label)] = pred;
            }
        }
        Ok(y)
    }

    /// Trains each link on the true labels of its predecessors.
    pub fn update(&mut self, x: &Mat, labels: &Mat) -> Result<()> {
        self.check_features(x)?;
        let mut row = Vec::with_capacity(self.features + self.order.len());
        for (i, xi) in x.row_iter().enumerate() {
            row.clear();
            row.extend_from_slice(xi);
            row.extend(self.order.iter().map(|&j| labels[(i, j)]));
            for (depth, (link, &label)) in self.links.iter_mut().zip(&self.order).enumerate() {
                link.update(&row[..self.features + depth], labels[(i, label)])?;
            }
        }
        Ok(())
    }
}

/// Online ensemble of classifier chains with seeded random label orders.
/// A label is predicted when at least half of the chains predict it.
#[derive(Clone, Debug)]
pub struct Oecc {
    chains: Vec<Chain>,
    labels: usize,
}

impl Oecc {
    pub fn new(schema: &[FeatureKind], labels: usize, ensemble: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chains = (0..ensemble)
            .map(|_| {
                let mut order: Vec<usize> = (0..labels).collect();
                order.shuffle(&mut rng);
                Chain::new(schema, order)
            })
            .collect();
        Oecc { chains, labels }
    }

    /// Ensemble over explicitly given chain orders.
    pub fn with_orders(schema: &[FeatureKind], orders: Vec<Vec<usize>>) -> Result<Self> {
        let labels = orders.first().map_or(0, Vec::len);
        for order in &orders {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..labels).collect::<Vec<_>>() {
                return Err(Error::InvalidArgument(format!(
                    "chain order {order:?} is not a permutation of 0..{labels}"
                )));
            }
        }
        Ok(Oecc {
            chains: orders.into_iter().map(|o| Chain::new(schema, o)).collect(),
            labels,
        })
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }
}

impl StreamLearner for Oecc {
    fn name(&self) -> String {
        "OECC".into()
    }

    fn predict(&mut self, x: &Mat) -> Result<Mat> {
        let mut votes = Mat::zeros(x.rows(), self.labels);
        if x.rows() == 0 {
            return Ok(votes);
        }
        for chain in &self.chains {
            votes = votes.add(&chain.predict(x)?)?;
        }
        let size = self.chains.len() as f64;
        Ok(votes.map(|v| if v / size >= 0.5 { 1.0 } else { 0.0 }))
    }

    fn train(&mut self, x: &Mat, labels: &Mat) -> Result<()> {
        check_labels(labels, x, self.labels)?;
        for chain in &mut self.chains {
            chain.update(x, labels)?;
        }
        Ok(())
    }
}
