//! Online multi-label stream classification with random label compression.
//!
//! Labels are encoded onto a handful of random orthonormal directions,
//! incremental base learners predict the encoded targets, and a
//! least-squares decoder, refreshed per batch with the Woodbury identity,
//! maps predictions back to label space. The crate also ships the online
//! baselines (binary relevance, classifier-chain ensemble, Majority,
//! Negative), multi-label metrics, dataset readers and a prequential
//! experiment harness.
//!
//! ```
//! use race_stream::prelude::*;
//!
//! let data = synth_stream(&SynthConfig { instances: 200, ..SynthConfig::default() }).unwrap();
//! let result = run_method(&data, Method::Race(Variant::ClsAdaptive), None, 50, 1, 7).unwrap();
//! assert_eq!(result.batches.len(), 3);
//! ```

pub mod baselines;
pub mod compression;
pub mod data_io;
pub mod error;
pub mod harness;
pub mod learners;
pub mod linalg;
pub mod metrics;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::baselines::{Majority, Negative, Obr, Oecc, StreamLearner};
    pub use crate::compression::{Race, RaceConfig, RaceState, Variant};
    pub use crate::data_io::{batch_iter, synth_stream, Dataset, StreamConfig, SynthConfig};
    pub use crate::harness::{run_method, run_prequential, ExperimentConfig, Method, Report};
    pub use crate::linalg::Mat;
    pub use crate::metrics::{Metric, MetricsReport};
}
