//! Throughput and memory measurement.
//!
//! [`run_bench`] starts the configured threads behind a start flag, lets them
//! run for a fixed wall-clock duration and reports operations per second.
//! Every completed call counts as one operation, including dequeues that
//! found the queue empty. Items still queued when the clock stops are
//! drained afterwards so the report can account for every item.

mod baseline;
mod probe;
mod report;
mod run;

use std::path::PathBuf;
use std::time::Duration;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lincheck::HistoryError;
use crate::queue::ConfigError;

pub use baseline::{MutexProducer, MutexQueue};
pub use probe::{memory_probe, MemoryReport, ProbeConfig};
pub use report::{emit_report, emit_reports, mean_report, parse_json_report, BenchReport, CSV_HEADER};
pub use run::{run_bench, run_repeated};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Producers only.
    EnqueueOnly,
    /// Producers plus one consumer.
    Mpsc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum QueueKind {
    /// The wait-free queue
    Jiffy,
    /// A VecDeque behind a mutex
    Mutex,
    /// No queue, one fetch-and-add per operation: the ceiling for any
    /// design built on a shared counter
    FaaUpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Human,
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchConfig {
    pub mode: Mode,
    pub queue: QueueKind,
    pub producers: usize,
    pub duration: Duration,
    pub warmup: Duration,
    pub buffer_capacity: usize,
    /// Pin thread `i` to CPU `i mod ncpus`.
    pub pin: bool,
    pub format: OutputFormat,
    /// Carried into the report so runs can be matched up later.
    pub seed: u64,
    /// Record the full operation history to this file.
    pub record_history: Option<PathBuf>,
    pub repeat: usize,
    pub pool_limit: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            mode: Mode::Mpsc,
            queue: QueueKind::Jiffy,
            producers: 1,
            duration: Duration::from_secs(1),
            warmup: Duration::ZERO,
            buffer_capacity: crate::DEFAULT_CAPACITY,
            pin: false,
            format: OutputFormat::Human,
            seed: 0,
            record_history: None,
            repeat: 1,
            pool_limit: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Queue(#[from] ConfigError),
    #[error("thread pinning is not supported on this platform")]
    PinUnsupported,
    #[error("failed to pin thread to cpu {cpu}: {source}")]
    Pin { cpu: usize, source: std::io::Error },
    #[error("history recording is not available for the fetch-and-add bound")]
    RecordUnsupported,
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.producers == 0 {
            return Err(BenchError::InvalidConfig("producers must be at least 1".into()));
        }
        if self.duration.is_zero() {
            return Err(BenchError::InvalidConfig("duration must be positive".into()));
        }
        if self.repeat == 0 {
            return Err(BenchError::InvalidConfig("repeat must be at least 1".into()));
        }
        if self.queue == QueueKind::Jiffy {
            let mut c = crate::Config::new().capacity(self.buffer_capacity);
            c.pool_limit = self.pool_limit;
            c.validate()?;
        }
        if self.pin && !cfg!(target_os = "linux") {
            return Err(BenchError::PinUnsupported);
        }
        if self.record_history.is_some() && self.queue == QueueKind::FaaUpperBound {
            return Err(BenchError::RecordUnsupported);
        }
        Ok(())
    }
}
