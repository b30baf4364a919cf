use std::collections::{HashMap, HashSet};
use std::fs::OpenOptions;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use molbench_core::prompt::PromptRecord;
use molbench_core::transcript::{read_transcripts, Transcript, TranscriptError};
use thiserror::Error;
use tokio::sync::Semaphore;
use tokio::task::JoinSet;

use crate::client::Client;

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("no prompts to run")]
    Empty,
    #[error("prompt id {0} appears more than once")]
    DuplicatePromptId(String),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] TranscriptError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("worker task failed: {0}")]
    Join(String),
}

#[derive(Debug, Clone, Default)]
pub struct BatchOptions {
    /// Append-only transcript JSONL. Successful transcripts already present
    /// for the same request hash are reused instead of re-queried.
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    /// One transcript per prompt, in input order.
    pub transcripts: Vec<Transcript>,
    pub reused: usize,
    pub fetched: usize,
    pub failed: usize,
}

/// Drops a partial trailing line left by an interrupted append so new lines
/// start on a fresh line.
fn repair_tail(path: &Path) -> std::io::Result<()> {
    let mut f = OpenOptions::new().read(true).write(true).open(path)?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    log::warn!("{}: discarding {} bytes of partial final line", path.display(), bytes.len() - keep);
    f.set_len(keep as u64)?;
    f.seek(SeekFrom::End(0))?;
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<HashMap<String, Transcript>, BatchError> {
    if !path.exists() {
        return Ok(HashMap::new());
    }
    repair_tail(path)?;
    let mut done = HashMap::new();
    for t in read_transcripts(path)? {
        if t.is_success() {
            done.insert(t.prompt_id.clone(), t);
        }
    }
    Ok(done)
}

/// Runs every prompt with at most `concurrency_limit` requests in flight.
/// Per-prompt failures are recorded in their transcripts; the batch itself
/// only fails on bad input or checkpoint I/O. Transcripts are written to the
/// checkpoint by this function alone, one line per completion.
pub async fn run_batch(client: &Client, prompts: &[PromptRecord], opts: &BatchOptions) -> Result<BatchOutcome, BatchError> {
    if prompts.is_empty() {
        return Err(BatchError::Empty);
    }
    let mut seen = HashSet::new();
    for p in prompts {
        if !seen.insert(p.prompt_id.as_str()) {
            return Err(BatchError::DuplicatePromptId(p.prompt_id.clone()));
        }
    }
    let mut done = match &opts.checkpoint {
        Some(path) => load_checkpoint(path)?,
        None => HashMap::new(),
    };
    let mut sink = match &opts.checkpoint {
        Some(path) => Some(OpenOptions::new().create(true).append(true).open(path)?),
        None => None,
    };

    let limit = Arc::new(Semaphore::new(client.config().concurrency_limit));
    let mut tasks = JoinSet::new();
    for (idx, prompt) in prompts.iter().enumerate() {
        let client = client.clone();
        let prompt = prompt.clone();
        let previous = done.remove(&prompt.prompt_id);
        let limit = limit.clone();
        tasks.spawn(async move {
            let _permit = limit.acquire_owned().await.expect("semaphore is never closed");
            let start = Instant::now();
            let prepared = match client.prepare(&prompt).await {
                Ok(p) => p,
                Err(e) => {
                    let t = client.transcript(&prompt, molbench_core::transcript::request_hash(b""), Err(e), 0, 0);
                    return (idx, t, false);
                }
            };
            if let Some(prev) = previous {
                if prev.request_hash == prepared.hash && prev.model == client.config().model_name {
                    return (idx, prev, true);
                }
            }
            let (outcome, attempts) = client.send(&prepared, &prompt.prompt_id).await;
            let t = client.transcript(&prompt, prepared.hash, outcome, attempts, start.elapsed().as_millis() as u64);
            (idx, t, false)
        });
    }

    let mut slots: Vec<Option<Transcript>> = vec![None; prompts.len()];
    let (mut reused, mut fetched, mut failed) = (0, 0, 0);
    let total = prompts.len();
    while let Some(joined) = tasks.join_next().await {
        let (idx, t, was_reused) = joined.map_err(|e| BatchError::Join(e.to_string()))?;
        if was_reused {
            reused += 1;
        } else {
            if let Some(f) = sink.as_mut() {
                let mut line = serde_json::to_vec(&t).expect("transcript serializes");
                line.push(b'\n');
                f.write_all(&line)?;
                f.flush()?;
            }
            if t.is_success() {
                fetched += 1;
            } else {
                log::warn!("{}: {}", t.prompt_id, t.error.as_deref().unwrap_or(""));
                failed += 1;
            }
        }
        slots[idx] = Some(t);
        let n = reused + fetched + failed;
        if n % 100 == 0 || n == total {
            log::info!("{n}/{total} prompts ({reused} from checkpoint, {failed} failed)");
        }
    }
    Ok(BatchOutcome {
        transcripts: slots.into_iter().map(|t| t.expect("every slot filled")).collect(),
        reused,
        fetched,
        failed,
    })
}
