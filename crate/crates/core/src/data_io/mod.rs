//! Dataset ingestion: Mulan-style ARFF + label XML, a sparse TSV format,
//! synthetic streams, and batching into prequential windows.

mod arff;
mod synth;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use arff::{parse_arff, write_arff, ArffFile, Attribute, AttributeKind, SparseRow};
pub use synth::{synth_stream, SynthConfig};

use crate::error::{Error, Result};
use crate::learners::FeatureKind;
use crate::linalg::Mat;

/// A multi-label dataset: sparse features plus a dense binary label matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub schema: Vec<Attribute>,
    pub features: Vec<SparseRow>,
    pub labels: Mat,
    pub label_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        name: String,
        schema: Vec<Attribute>,
        features: Vec<SparseRow>,
        labels: Mat,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if features.len() != labels.rows() {
            return Err(Error::shape(
                "dataset",
                format!("{} label rows", features.len()),
                labels.rows(),
            ));
        }
        if label_names.len() != labels.cols() {
            return Err(Error::shape(
                "dataset",
                format!("{} label names", labels.cols()),
                label_names.len(),
            ));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = label_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::LabelHeader(format!("duplicate label `{dup}`")));
        }
        if labels.as_slice().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
        }
        if let Some(bad) = features
            .iter()
            .flatten()
            .find(|&&(idx, _)| idx >= schema.len())
        {
            return Err(Error::InvalidArgument(format!(
                "feature index {} out of range for {} features",
                bad.0,
                schema.len()
            )));
        }
        Ok(Dataset {
            name,
            schema,
            features,
            labels,
            label_names,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.schema.len()
    }

    pub fn num_labels(&self) -> usize {
        self.label_names.len()
    }

    pub fn feature_kinds(&self) -> Vec<FeatureKind> {
        self.schema
            .iter()
            .map(|a| match &a.kind {
                AttributeKind::Numeric => FeatureKind::Numeric,
                AttributeKind::Nominal(values) => FeatureKind::Nominal {
                    values: values.len(),
                },
            })
            .collect()
    }

    /// Dense `rows.len() x m` feature block.
    pub fn dense_features(&self, rows: &[usize]) -> Mat {
        let m = self.num_features();
        let mut out = Mat::zeros(rows.len(), m);
        for (r, &i) in rows.iter().enumerate() {
            let dst = out.row_mut(r);
            for &(j, v) in &self.features[i] {
                dst[j] = v;
            }
        }
        out
    }

    pub fn label_rows(&self, rows: &[usize]) -> Mat {
        let l = self.num_labels();
        let mut out = Mat::zeros(rows.len(), l);
        for (r, &i) in rows.iter().enumerate() {
            out.row_mut(r).copy_from_slice(self.labels.row(i));
        }
        out
    }

    /// Mean number of positive labels per instance.
    pub fn label_cardinality(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.labels.as_slice().iter().sum::<f64>() / self.len() as f64
    }

    /// Fraction of positive entries in the label matrix.
    pub fn label_density(&self) -> f64 {
        if self.num_labels() == 0 {
            return 0.0;
        }
        self.label_cardinality() / self.num_labels() as f64
    }

    /// Splits named label attributes out of an ARFF file.
    pub fn from_arff(file: ArffFile, label_names: &[String]) -> Result<Self> {
        let mut label_cols = Vec::with_capacity(label_names.len());
        for name in label_names {
            let idx = file
                .attributes
                .iter()
                .position(|a| &a.name == name)
                .ok_or_else(|| {
                    Error::LabelHeader(format!("label `{name}` is not an ARFF attribute"))
                })?;
            label_cols.push(idx);
        }
        // Per label column, which stored value means "positive".
        let mut positive_code = Vec::with_capacity(label_cols.len());
        for &c in &label_cols {
            let attr = &file.attributes[c];
            positive_code.push(match &attr.kind {
                AttributeKind::Numeric => None,
                AttributeKind::Nominal(values) => {
                    if values.iter().any(|v| v != "0" && v != "1") {
                        return Err(Error::LabelHeader(format!(
                            "label `{}` has non-binary levels {values:?}",
                            attr.name
                        )));
                    }
                    values.iter().position(|v| v == "1").map(|p| p as f64)
                }
            });
        }

        let is_label: Vec<Option<usize>> = (0..file.attributes.len())
            .map(|a| label_cols.iter().position(|&c| c == a))
            .collect();
        let mut remap = vec![usize::MAX; file.attributes.len()];
        let mut schema = Vec::new();
        for (a, attr) in file.attributes.iter().enumerate() {
            if is_label[a].is_none() {
                remap[a] = schema.len();
                schema.push(attr.clone());
            }
        }

        let n = file.rows.len();
        let l = label_cols.len();
        let mut labels = Mat::zeros(n, l);
        let mut features = Vec::with_capacity(n);
        for (i, row) in file.rows.iter().enumerate() {
            let mut feat = SparseRow::new();
            let mut explicit = vec![false; l];
            for &(a, v) in row {
                match is_label[a] {
                    None => feat.push((remap[a], v)),
                    Some(j) => {
                        explicit[j] = true;
                        labels[(i, j)] = label_value(&file.attributes[a], positive_code[j], v, i)?;
                    }
                }
            }
            for j in 0..l {
                if !explicit[j] {
                    // absent sparse entry: stored value 0
                    labels[(i, j)] =
                        label_value(&file.attributes[label_cols[j]], positive_code[j], 0.0, i)?;
                }
            }
            features.push(feat);
        }
        Dataset::new(file.relation, schema, features, labels, label_names.to_vec())
    }

    /// Inverse of [`Dataset::from_arff`]: features first, then `{0,1}` labels.
    pub fn to_arff(&self) -> ArffFile {
        let m = self.num_features();
        let mut attributes = self.schema.clone();
        attributes.extend(
            self.label_names
                .iter()
                .map(|n| Attribute::nominal(n.clone(), &["0", "1"])),
        );
        let rows = self
            .features
            .iter()
            .enumerate()
            .map(|(i, feat)| {
                let mut row = feat.clone();
                row.extend(
                    self.labels
                        .row(i)
                        .iter()
                        .enumerate()
                        .filter(|&(_, &v)| v != 0.0)
                        .map(|(j, &v)| (m + j, v)),
                );
                row
            })
            .collect();
        ArffFile {
            relation: self.name.clone(),
            attributes,
            rows,
        }
    }

    /// Mulan label header for this dataset.
    pub fn label_xml(&self) -> String {
        let mut out = String::from(
            "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<labels xmlns=\"http://mulan.sourceforge.net/labels\">\n",
        );
        for name in &self.label_names {
            let escaped = name
                .replace('&', "&amp;")
                .replace('"', "&quot;")
                .replace('<', "&lt;");
            let _ = writeln!(out, "  <label name=\"{escaped}\"></label>");
        }
        out.push_str("</labels>\n");
        out
    }
}

fn label_value(attr: &Attribute, positive: Option<f64>, stored: f64, row: usize) -> Result<f64> {
    if stored.is_nan() {
        return Err(Error::LabelHeader(format!(
            "missing value for label `{}` in data row {}",
            attr.name,
            row + 1
        )));
    }
    match positive {
        // nominal {0,1} (any declaration order)
        Some(p) => Ok(if stored == p { 1.0 } else { 0.0 }),
        None if matches!(attr.kind, AttributeKind::Nominal(_)) => Ok(0.0),
        None if stored == 0.0 || stored == 1.0 => Ok(stored),
        None => Err(Error::LabelHeader(format!(
            "label `{}` has non-binary value {stored} in data row {}",
            attr.name,
            row + 1
        ))),
    }
}

/// Label names from a Mulan label XML header, nested groups flattened in
/// document order.
pub fn parse_label_xml(text: &str) -> Result<Vec<String>> {
    let doc = roxmltree::Document::parse(text).map_err(|e| Error::LabelHeader(e.to_string()))?;
    let mut names = Vec::new();
    let mut seen = HashSet::new();
    for node in doc.descendants().filter(|n| n.has_tag_name("label")) {
        let name = node.attribute("name").ok_or_else(|| {
            Error::LabelHeader(format!(
                "label element without a name at byte {}",
                node.range().start
            ))
        })?;
        if !seen.insert(name.to_string()) {
            return Err(Error::LabelHeader(format!("duplicate label `{name}`")));
        }
        names.push(name.to_string());
    }
    Ok(names)
}

pub fn load_dataset(arff_path: &Path, xml_path: &Path) -> Result<Dataset> {
    let arff = parse_arff(&std::fs::read_to_string(arff_path)?)?;
    let labels = parse_label_xml(&std::fs::read_to_string(xml_path)?)?;
    Dataset::from_arff(arff, &labels)
}

/// Parses `row \t idx:val,... \t labelbits` lines. `num_features` defaults to
/// one past the largest index seen.
pub fn parse_sparse_tsv(name: &str, text: &str, num_features: Option<usize>) -> Result<Dataset> {
    let mut features = Vec::new();
    let mut label_rows: Vec<Vec<f64>> = Vec::new();
    let mut max_idx = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(line, "expected 3 tab-separated fields"));
        }
        fields[0]
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::parse(line, format!("bad row id `{}`", fields[0])))?;
        let mut row = SparseRow::new();
        for entry in fields[1].split(',').map(str::trim).filter(|e| !e.is_empty()) {
            let (i, v) = entry
                .split_once(':')
                .ok_or_else(|| Error::parse(line, format!("bad entry `{entry}`")))?;
            let i: usize = i
                .parse()
                .map_err(|_| Error::parse(line, format!("bad index `{i}`")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::parse(line, format!("bad value `{v}`")))?;
            if row.last().is_some_and(|&(p, _)| p >= i) {
                return Err(Error::parse(line, "indices must increase"));
            }
            max_idx = max_idx.max(Some(i));
            if v != 0.0 {
                row.push((i, v));
            }
        }
        let bits = fields[2]
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(0.0),
                '1' => Ok(1.0),
                other => Err(Error::parse(line, format!("label bit `{other}`"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = label_rows.first() {
            if first.len() != bits.len() {
                return Err(Error::parse(line, "label bit count changed"));
            }
        }
        label_rows.push(bits);
        features.push(row);
    }
    let m = match (num_features, max_idx) {
        (Some(m), Some(i)) if i >= m => {
            return Err(Error::InvalidArgument(format!(
                "feature index {i} out of range for {m} features"
            )))
        }
        (Some(m), _) => m,
        (None, i) => i.map_or(0, |i| i + 1),
    };
    let l = label_rows.first().map_or(0, Vec::len);
    let labels = if label_rows.is_empty() {
        Mat::zeros(0, 0)
    } else {
        Mat::from_rows(&label_rows)?
    };
    Dataset::new(
        name.to_string(),
        (0..m).map(|f| Attribute::numeric(format!("f{f}"))).collect(),
        features,
        labels,
        (0..l).map(|j| format!("label{j}")).collect(),
    )
}

pub fn write_sparse_tsv(dataset: &Dataset) -> String {
    let mut out = String::new();
    for (i, row) in dataset.features.iter().enumerate() {
        let feats: Vec<String> = row.iter().map(|(j, v)| format!("{j}:{v}")).collect();
        let bits: String = dataset
            .labels
            .row(i)
            .iter()
            .map(|&v| if v == 1.0 { '1' } else { '0' })
            .collect();
        let _ = writeln!(out, "{i}\t{}\t{bits}", feats.join(","));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    /// Instances per batch.
    pub window: usize,
    /// Stop after this many batches.
    pub max_batches: Option<usize>,
    /// Replay in a seeded random order instead of file order.
    pub shuffle_seed: Option<u64>,
}

impl StreamConfig {
    pub fn new(window: usize) -> Self {
        StreamConfig {
            window,
            max_batches: None,
            shuffle_seed: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StreamBatch {
    pub index: usize,
    /// Dataset row indices in this batch.
    pub rows: Vec<usize>,
    pub features: Mat,
    pub labels: Mat,
}

pub struct BatchIter<'a> {
    dataset: &'a Dataset,
    order: Vec<usize>,
    window: usize,
    next: usize,
    emitted: usize,
    max_batches: Option<usize>,
}

impl Iterator for BatchIter<'_> {
    type Item = StreamBatch;

    fn next(&mut self) -> Option<StreamBatch> {
        if self.next >= self.order.len() || self.max_batches.is_some_and(|m| self.emitted >= m) {
            return None;
        }
        let end = (self.next + self.window).min(self.order.len());
        let rows = self.order[self.next..end].to_vec();
        self.next = end;
        let batch = StreamBatch {
            index: self.emitted,
            features: self.dataset.dense_features(&rows),
            labels: self.dataset.label_rows(&rows),
            rows,
        };
        self.emitted += 1;
        Some(batch)
    }
}

/// Slices the dataset into consecutive windows; the last may be short.
pub fn batch_iter<'a>(dataset: &'a Dataset, config: &StreamConfig) -> Result<BatchIter<'a>> {
    if config.window == 0 {
        return Err(Error::InvalidArgument("window size must be >= 1".into()));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    if let Some(seed) = config.shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Ok(BatchIter {
        dataset,
        order,
        window: config.window,
        next: 0,
        emitted: 0,
        max_batches: config.max_batches,
    })
}

/// Number of batches a dataset of `n` rows yields with `window`.
pub fn batch_count(n: usize, window: usize) -> usize {
    n.div_ceil(window)
}
