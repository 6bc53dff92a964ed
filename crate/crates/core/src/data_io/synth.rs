//! Seeded synthetic multi-label streams.
//!
//! Labels come from latent Gaussian scores. Labels `2p` and `2p + 1` share
//! latent factor `p`; `dependency` is the share of score variance carried by
//! that factor, so 0 gives independent labels and values near 1 make the
//! pairs co-occur. Every label column is thresholded at its own empirical
//! quantile, which pins the realized density to the request up to rounding
//! of `density * n`. Features are the sum of the prototypes of the active
//! labels plus unit Gaussian noise.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Attribute, Dataset, SparseRow};
use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub instances: usize,
    pub features: usize,
    pub labels: usize,
    pub density: f64,
    pub dependency: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            instances: 1000,
            features: 20,
            labels: 16,
            density: 0.2,
            dependency: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn name(&self) -> String {
        format!(
            "synth(n={},m={},l={},density={},dep={},seed={})",
            self.instances, self.features, self.labels, self.density, self.dependency, self.seed
        )
    }
}

/// Parses `m=20,l=16,n=5000,density=0.2,dep=0.6[,seed=7]`.
impl FromStr for SynthConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut cfg = SynthConfig::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("expected key=value, got `{part}`")))?;
            let bad = || Error::InvalidArgument(format!("bad value for `{key}`: `{value}`"));
            match key.trim() {
                "m" => cfg.features = value.parse().map_err(|_| bad())?,
                "l" => cfg.labels = value.parse().map_err(|_| bad())?,
                "n" => cfg.instances = value.parse().map_err(|_| bad())?,
                "density" => cfg.density = value.parse().map_err(|_| bad())?,
                "dep" => cfg.dependency = value.parse().map_err(|_| bad())?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown synthetic parameter `{other}`"
                    )))
                }
            }
        }
        Ok(cfg)
    }
}

pub fn synth_stream(cfg: &SynthConfig) -> Result<Dataset> {
    if !(cfg.density > 0.0 && cfg.density < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "density must lie in (0, 1), got {}",
            cfg.density
        )));
    }
    if !(0.0..=1.0).contains(&cfg.dependency) {
        return Err(Error::InvalidArgument(format!(
            "dependency strength must lie in [0, 1], got {}",
            cfg.dependency
        )));
    }
    if cfg.instances == 0 || cfg.labels == 0 {
        return Err(Error::InvalidArgument(
            "synthetic stream needs at least one instance and one label".into(),
        ));
    }
    let (n, m, l) = (cfg.instances, cfg.features, cfg.labels);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

    let prototypes: Vec<Vec<f64>> = (0..l).map(|_| (0..m).map(|_| normal()).collect()).collect();
    let factors = l.div_ceil(2);
    let shared = cfg.dependency.sqrt();
    let own = (1.0 - cfg.dependency).sqrt();

    let mut scores = Mat::zeros(n, l);
    for i in 0..n {
        let z: Vec<f64> = (0..factors).map(|_| normal()).collect();
        for j in 0..l {
            scores[(i, j)] = own * normal() + shared * z[j / 2];
        }
    }

    let positives = ((cfg.density * n as f64).round() as usize).min(n);
    let mut labels = Mat::zeros(n, l);
    let mut order: Vec<usize> = (0..n).collect();
    for j in 0..l {
        order.sort_by(|&a, &b| scores[(b, j)].total_cmp(&scores[(a, j)]).then(a.cmp(&b)));
        for &i in &order[..positives] {
            labels[(i, j)] = 1.0;
        }
    }

    let mut rows: Vec<SparseRow> = Vec::with_capacity(n);
    for i in 0..n {
        let mut x: Vec<f64> = (0..m).map(|_| normal()).collect();
        for (j, proto) in prototypes.iter().enumerate() {
            if labels[(i, j)] == 1.0 {
                x.iter_mut().zip(proto).for_each(|(xi, p)| *xi += p);
            }
        }
        rows.push(x.into_iter().enumerate().filter(|&(_, v)| v != 0.0).collect());
    }

    Dataset::new(
        cfg.name(),
        (0..m).map(|f| Attribute::numeric(format!("f{f}"))).collect(),
        rows,
        labels,
        (0..l).map(|j| format!("label{j}")).collect(),
    )
}
