//! Chat-completions client for benchmark prompts: one request per prompt
//! with the structure image attached, bounded concurrency, retries and a
//! resumable transcript checkpoint. `mock` provides a scripted server that
//! speaks the same wire format.

pub mod batch;
pub mod client;
pub mod config;
pub mod mock;
pub mod wire;

pub use batch::{run_batch, BatchError, BatchOptions, BatchOutcome};
pub use client::{CallError, Client};
pub use config::{Backoff, ConfigError, EndpointConfig};
pub use mock::{MockScript, MockServer, MockStats};
