//! Short throughput comparison of the queue, a mutex-protected queue and a
//! bare fetch-and-add counter. `jiffy-bench` exposes the same harness with
//! every option.
//!
//! cargo run --release --example bench_compare -- [producers]

use std::time::Duration;

use jiffy::bench::{emit_report, run_bench, BenchConfig, OutputFormat, QueueKind};

fn main() {
    let producers = std::env::args().nth(1).map_or(4, |a| a.parse().expect("producer count"));
    let mut out = std::io::stdout().lock();
    for queue in [QueueKind::Jiffy, QueueKind::Mutex, QueueKind::FaaUpperBound] {
        let cfg = BenchConfig {
            queue,
            producers,
            duration: Duration::from_millis(500),
            warmup: Duration::from_millis(100),
            ..Default::default()
        };
        let report = run_bench(&cfg).unwrap();
        emit_report(&report, OutputFormat::Human, &mut out).unwrap();
    }
}
