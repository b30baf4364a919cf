//! Transcript records: one line per answered prompt. Batch runs and external
//! fine-tuning jobs both write this schema; eval reads it.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::prompt::{PromptMode, Representation};

pub const TRANSCRIPT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub schema_version: u32,
    pub prompt_id: String,
    pub dataset: String,
    pub target_id: u64,
    pub model: String,
    pub mode: PromptMode,
    pub representation: Representation,
    /// sha256 hex of the serialized request body.
    pub request_hash: String,
    /// Raw completion text. Exactly one of `response` and `error` is set.
    pub response: Option<String>,
    pub error: Option<String>,
    pub latency_ms: u64,
    pub attempts: u32,
    /// Sampling fields as sent on the wire, for the record.
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_tokens: Option<u32>,
}

impl Transcript {
    pub fn is_success(&self) -> bool {
        self.response.is_some() && self.error.is_none()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TranscriptError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: transcript must carry exactly one of response and error")]
    BadState { line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads a transcript file. A malformed final line (an interrupted append) is
/// dropped; malformed lines elsewhere are errors.
pub fn read_transcripts(path: &Path) -> Result<Vec<Transcript>, TranscriptError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Transcript>(line) {
            Ok(t) => {
                if t.response.is_some() == t.error.is_some() {
                    return Err(TranscriptError::BadState { line: i + 1 });
                }
                out.push(t)
            }
            Err(_) if Some(i) == last => {
                log::warn!("{}: dropping truncated final line", path.display());
            }
            Err(source) => return Err(TranscriptError::Json { line: i + 1, source }),
        }
    }
    Ok(out)
}

pub fn write_transcripts(path: &Path, transcripts: &[Transcript]) -> Result<(), TranscriptError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for t in transcripts {
        serde_json::to_writer(&mut w, t).map_err(|source| TranscriptError::Json { line: 0, source })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// sha256 hex of a serialized request body.
pub fn request_hash(body: &[u8]) -> String {
    Sha256::digest(body).iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of a transcript list with wall-clock latency zeroed. Two runs that
/// sent the same requests and got the same answers in the same order agree.
pub fn transcript_digest(transcripts: &[Transcript]) -> String {
    let mut h = Sha256::new();
    for t in transcripts {
        let t = Transcript { latency_ms: 0, ..t.clone() };
        h.update(serde_json::to_vec(&t).expect("transcript serializes"));
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
