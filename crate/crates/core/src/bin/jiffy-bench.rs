//! Throughput benchmark for the queue and its baselines.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use jiffy::bench::{emit_reports, run_repeated, BenchConfig, Mode, OutputFormat, QueueKind};

#[derive(Debug, Parser)]
#[command(name = "jiffy-bench", about = "Measure queue throughput", version)]
struct Args {
    #[arg(long, value_enum, default_value = "mpsc")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "jiffy")]
    queue: QueueKind,
    #[arg(long, default_value_t = 1)]
    producers: usize,
    #[arg(long, default_value_t = 1.0)]
    duration_secs: f64,
    #[arg(long, default_value_t = 0.0)]
    warmup_secs: f64,
    /// Slots per buffer.
    #[arg(long, default_value_t = jiffy::DEFAULT_CAPACITY)]
    buffer_size: usize,
    /// Pin each thread to its own CPU.
    #[arg(long)]
    pin: bool,
    /// Write the operation history of the measured run as JSON lines.
    #[arg(long, value_name = "PATH")]
    record_history: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "human")]
    format: OutputFormat,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Measured runs; more than one adds a mean row.
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    /// Recycle slot arrays through a pool of this size.
    #[arg(long, value_name = "N")]
    pool: Option<usize>,
}

fn secs(name: &str, v: f64) -> Result<Duration, String> {
    Duration::try_from_secs_f64(v).map_err(|_| format!("--{name} must be a non-negative number, got {v}"))
}

fn config(a: Args) -> Result<BenchConfig, String> {
    Ok(BenchConfig {
        mode: a.mode,
        queue: a.queue,
        producers: a.producers,
        duration: secs("duration-secs", a.duration_secs)?,
        warmup: secs("warmup-secs", a.warmup_secs)?,
        buffer_capacity: a.buffer_size,
        pin: a.pin,
        format: a.format,
        seed: a.seed,
        record_history: a.record_history,
        repeat: a.repeat,
        pool_limit: a.pool,
    })
}

fn main() -> ExitCode {
    let cfg = match config(Args::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("jiffy-bench: {e}");
            return ExitCode::from(2);
        }
    };
    let reports = match run_repeated(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("jiffy-bench: {e}");
            return ExitCode::from(2);
        }
    };
    let mut out = io::stdout().lock();
    if let Err(e) = emit_reports(&reports, cfg.format, &mut out).and_then(|_| out.flush()) {
        eprintln!("jiffy-bench: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
