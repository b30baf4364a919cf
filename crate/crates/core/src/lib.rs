//! Core library for a multimodal molecular property benchmark: molecule
//! parsing, fingerprints, depictions, dataset curation, prompt rendering,
//! metrics, contrastive losses and result reporting.

pub mod chem;
pub mod contrastive;
pub mod corpus;
pub mod dataset;
pub mod depict;
pub mod eval;
pub mod fingerprint;
pub mod prompt;
pub mod report;
pub mod scalar;
pub mod transcript;

pub use scalar::Scalar;

pub type EmbeddingBatchF32 = contrastive::EmbeddingBatch<f32>;
pub type EmbeddingBatchF64 = contrastive::EmbeddingBatch<f64>;
pub type ClassificationMetricsF64 = eval::ClassificationMetrics<f64>;
pub type RegressionMetricsF32 = eval::RegressionMetrics<f32>;
pub type RegressionMetricsF64 = eval::RegressionMetrics<f64>;
