//! NT-Xent loss over paired embeddings, positive-pair manifests and the job
//! file handed to the external fine-tuning step.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::MoleculeRecord;
use crate::depict::Transform;
use crate::fingerprint::{PairStrategy, SimilarityIndex, DEFAULT_MINING_THRESHOLD, DEFAULT_POSITIVES_PER_ANCHOR};
use crate::scalar::Scalar;

pub const PAIR_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ContrastiveError {
    #[error("zero vector")]
    ZeroVector,
    #[error("dimension mismatch ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("vector {0} is not unit length")]
    NotNormalized(usize),
    #[error("pair map is not a fixed-point-free involution at index {0}")]
    BadPairing(usize),
    #[error("batch needs at least one pair")]
    EmptyBatch,
    #[error("temperature must be positive")]
    BadTemperature,
    #[error("contrastive weight must be non-negative")]
    NegativeLambda,
    #[error("non-finite loss input")]
    NonFinite,
    #[error("{0}")]
    Export(String),
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// `a·b / (|a| |b|)`
pub fn cosine_sim<T: Scalar>(a: &[T], b: &[T]) -> Result<T, ContrastiveError> {
    if a.len() != b.len() {
        return Err(ContrastiveError::DimensionMismatch(a.len(), b.len()));
    }
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == T::zero() || nb == T::zero() {
        return Err(ContrastiveError::ZeroVector);
    }
    Ok(dot(a, b) / (na * nb))
}

/// 2N unit vectors where `pair_of[i]` is the positive partner of `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch<T> {
    vectors: Vec<Vec<T>>,
    pair_of: Vec<usize>,
}

impl<T: Scalar> EmbeddingBatch<T> {
    pub fn new(vectors: Vec<Vec<T>>, pair_of: Vec<usize>) -> Result<EmbeddingBatch<T>, ContrastiveError> {
        if vectors.is_empty() {
            return Err(ContrastiveError::EmptyBatch);
        }
        if pair_of.len() != vectors.len() {
            return Err(ContrastiveError::BadPairing(pair_of.len().min(vectors.len())));
        }
        let d = vectors[0].len();
        let tol = T::of(1e-6);
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != d {
                return Err(ContrastiveError::DimensionMismatch(d, v.len()));
            }
            if (dot(v, v).sqrt() - T::one()).abs() > tol {
                return Err(ContrastiveError::NotNormalized(i));
            }
            let j = pair_of[i];
            if j >= vectors.len() || j == i || pair_of[j] != i {
                return Err(ContrastiveError::BadPairing(i));
            }
        }
        Ok(EmbeddingBatch { vectors, pair_of })
    }

    /// Normalizes each view and lays the batch out as `[a_1..a_N, b_1..b_N]`
    /// with `a_k` paired to `b_k`.
    pub fn from_pairs(pairs: &[(Vec<T>, Vec<T>)]) -> Result<EmbeddingBatch<T>, ContrastiveError> {
        let n = pairs.len();
        let mut vectors = Vec::with_capacity(2 * n);
        for side in 0..2 {
            for (a, b) in pairs {
                vectors.push(normalize(if side == 0 { a } else { b })?);
            }
        }
        let pair_of = (0..2 * n).map(|i| if i < n { i + n } else { i - n }).collect();
        EmbeddingBatch::new(vectors, pair_of)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<T>] {
        &self.vectors
    }

    pub fn pair_of(&self) -> &[usize] {
        &self.pair_of
    }
}

pub fn normalize<T: Scalar>(v: &[T]) -> Result<Vec<T>, ContrastiveError> {
    let norm = dot(v, v).sqrt();
    if norm == T::zero() {
        return Err(ContrastiveError::ZeroVector);
    }
    Ok(v.iter().map(|&x| x / norm).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub tau: f64,
    pub lambda: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        LossParams { tau: 0.5, lambda: 1.0 }
    }
}

/// NT-Xent over all 2N anchors:
/// `-(1/2N) Σ_i log( exp(s_ij/τ) / Σ_{k≠i} exp(s_ik/τ) )`
/// with `s` the cosine similarity and `j` the partner of `i`. The log-ratio is
/// evaluated as `s_ij/τ - logsumexp_{k≠i}(s_ik/τ)`.
pub fn ntxent_loss<T: Scalar>(batch: &EmbeddingBatch<T>, tau: T) -> Result<T, ContrastiveError> {
    if !(tau > T::zero()) || !tau.is_finite() {
        return Err(ContrastiveError::BadTemperature);
    }
    let m = batch.len();
    let mut total = T::zero();
    for i in 0..m {
        let logits: Vec<T> = (0..m)
            .filter(|&k| k != i)
            .map(|k| cosine_sim(&batch.vectors[i], &batch.vectors[k]).map(|s| s / tau))
            .collect::<Result<_, _>>()?;
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<T>().ln();
        let pos = cosine_sim(&batch.vectors[i], &batch.vectors[batch.pair_of[i]])? / tau;
        total = total + (lse - pos);
    }
    Ok(total / T::of_usize(m))
}

/// `task + λ·contrastive`
pub fn total_loss<T: Scalar>(task_loss: T, contrastive_loss: T, lambda: T) -> Result<T, ContrastiveError> {
    if !task_loss.is_finite() || !contrastive_loss.is_finite() || !lambda.is_finite() {
        return Err(ContrastiveError::NonFinite);
    }
    if lambda < T::zero() {
        return Err(ContrastiveError::NegativeLambda);
    }
    Ok(task_loss + lambda * contrastive_loss)
}

/// One line of a pair manifest. Aug entries pair a molecule image with
/// itself under two transforms; T-Aug entries pair two molecules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub schema_version: u32,
    pub strategy: PairStrategy,
    pub anchor: u64,
    pub anchor_image: String,
    pub positive: u64,
    pub positive_image: String,
    pub score: Option<f64>,
    pub transforms: Option<[Transform; 2]>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairManifest {
    pub strategy: PairStrategy,
    pub seed: u64,
    pub entries: Vec<PairEntry>,
    /// Anchors with no partner above the similarity threshold.
    pub skipped: Vec<u64>,
}

fn uniform_below(rng: &mut Xoshiro256StarStar, n: usize) -> usize {
    ((u128::from(rng.next_u64()) * n as u128) >> 64) as usize
}

/// Two distinct augmentations for `id`, drawn from a stream keyed by
/// `(seed, id)` so the choice does not depend on record order.
pub fn draw_transform_pair(seed: u64, id: u64) -> [Transform; 2] {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed ^ id.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let pool = &Transform::AUGMENTATIONS;
    let a = uniform_below(&mut rng, pool.len());
    let mut b = uniform_below(&mut rng, pool.len() - 1);
    if b >= a {
        b += 1;
    }
    [pool[a], pool[b]]
}

/// Pair universe for contrastive training. `index` must hold the records'
/// fingerprints when `strategy` is T-Aug; it is unused for Aug.
pub fn build_pair_manifest(
    records: &[MoleculeRecord],
    index: &SimilarityIndex,
    strategy: PairStrategy,
    seed: u64,
) -> PairManifest {
    let images: HashMap<u64, &str> = records.iter().map(|r| (r.id, r.image_path.as_str())).collect();
    let mut ordered: Vec<&MoleculeRecord> = records.iter().collect();
    ordered.sort_by_key(|r| r.id);
    match strategy {
        PairStrategy::Aug => {
            let entries = ordered
                .par_iter()
                .map(|r| PairEntry {
                    schema_version: PAIR_SCHEMA_VERSION,
                    strategy,
                    anchor: r.id,
                    anchor_image: r.image_path.clone(),
                    positive: r.id,
                    positive_image: r.image_path.clone(),
                    score: None,
                    transforms: Some(draw_transform_pair(seed, r.id)),
                    seed,
                })
                .collect();
            PairManifest {
                strategy,
                seed,
                entries,
                skipped: Vec::new(),
            }
        }
        PairStrategy::TAug => {
            let mined = index.mine_positives(DEFAULT_MINING_THRESHOLD, DEFAULT_POSITIVES_PER_ANCHOR);
            let entries = mined
                .pairs
                .iter()
                .filter(|p| images.contains_key(&p.anchor_id) && images.contains_key(&p.positive_id))
                .map(|p| PairEntry {
                    schema_version: PAIR_SCHEMA_VERSION,
                    strategy,
                    anchor: p.anchor_id,
                    anchor_image: images[&p.anchor_id].to_string(),
                    positive: p.positive_id,
                    positive_image: images[&p.positive_id].to_string(),
                    score: Some(p.similarity),
                    transforms: None,
                    seed,
                })
                .collect();
            PairManifest {
                strategy,
                seed,
                entries,
                skipped: mined.skipped.into_iter().collect(),
            }
        }
    }
}

pub fn write_pair_manifest(path: &Path, manifest: &PairManifest) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for e in &manifest.entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_pair_entries(path: &Path) -> Result<Vec<PairEntry>, ContrastiveError> {
    read_jsonl(path)
}

/// One exported embedding: view 0 or 1 of pair `pair`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub pair: usize,
    pub view: u8,
    pub id: u64,
    pub vector: Vec<f64>,
}

fn read_jsonl<R: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<R>, ContrastiveError> {
    let file = std::fs::File::open(path).map_err(|e| ContrastiveError::Export(e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ContrastiveError::Export(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ContrastiveError::Export(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

pub fn write_embedding_export(path: &Path, records: &[EmbeddingRecord]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_embedding_export(path: &Path) -> Result<Vec<EmbeddingRecord>, ContrastiveError> {
    read_jsonl(path)
}

/// Rebuilds a batch from exported embeddings. Every pair index `0..N` must
/// have exactly one view 0 and one view 1; vectors are re-normalized.
pub fn batch_from_export<T: Scalar>(records: &[EmbeddingRecord]) -> Result<EmbeddingBatch<T>, ContrastiveError> {
    let n = records.iter().map(|r| r.pair + 1).max().unwrap_or(0);
    let mut views: Vec<[Option<Vec<T>>; 2]> = vec![[None, None]; n];
    for r in records {
        if r.view > 1 {
            return Err(ContrastiveError::Export(format!("pair {}: view must be 0 or 1", r.pair)));
        }
        let slot = &mut views[r.pair][usize::from(r.view)];
        if slot.is_some() {
            return Err(ContrastiveError::Export(format!("pair {} view {} repeated", r.pair, r.view)));
        }
        *slot = Some(r.vector.iter().map(|&x| T::of(x)).collect());
    }
    let pairs = views
        .into_iter()
        .enumerate()
        .map(|(p, [a, b])| match (a, b) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(ContrastiveError::Export(format!("pair {p} is incomplete"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    EmbeddingBatch::from_pairs(&pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraConfig {
    pub rank: u32,
    pub alpha: u32,
    pub dropout: f64,
}

impl Default for LoraConfig {
    fn default() -> Self {
        LoraConfig {
            rank: 16,
            alpha: 32,
            dropout: 0.05,
        }
    }
}

/// Job file for the external fine-tuning step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainJob {
    pub base_model: String,
    #[serde(default)]
    pub lora: LoraConfig,
    /// Components kept frozen. The vision encoder is frozen unless the
    /// contrastive stage is enabled.
    pub frozen: Vec<String>,
    #[serde(default)]
    pub contrastive: bool,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    pub epochs: u32,
    pub finetune_fraction: f64,
    pub seed: u64,
    pub dataset_manifest: String,
    pub pair_manifest: Option<String>,
    pub output_dir: String,
}

fn default_lambda() -> f64 {
    LossParams::default().lambda
}

fn default_tau() -> f64 {
    LossParams::default().tau
}

impl TrainJob {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.finetune_fraction > 0.0 && self.finetune_fraction <= 1.0) {
            return Err(format!("finetune_fraction {} outside (0, 1]", self.finetune_fraction));
        }
        if !(self.lambda >= 0.0) {
            return Err(format!("lambda {} is negative", self.lambda));
        }
        if !(self.tau > 0.0) {
            return Err(format!("tau {} must be positive", self.tau));
        }
        if !(0.0..1.0).contains(&self.lora.dropout) || self.lora.rank == 0 {
            return Err("LoRA rank must be positive and dropout in [0, 1)".to_string());
        }
        if self.contrastive && self.pair_manifest.is_none() {
            return Err("contrastive stage needs a pair manifest".to_string());
        }
        if self.contrastive && self.frozen.iter().any(|f| f == "vision_encoder") {
            return Err("vision_encoder cannot be frozen when the contrastive stage is enabled".to_string());
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<TrainJob, String> {
        let job: TrainJob = toml::from_str(text).map_err(|e| e.to_string())?;
        job.validate()?;
        Ok(job)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("job serializes")
    }
}
