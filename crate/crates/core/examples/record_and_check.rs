//! Records a concurrent history and checks it against FIFO semantics for a
//! single consumer. Pass a path to also save the history as JSON lines.
//!
//! cargo run --release --example record_and_check -- [out.jsonl]

use jiffy::lincheck::{check_mpsc_fifo, record_workload, WorkloadConfig};

fn main() {
    let threaded = WorkloadConfig { producers: 4, ops_per_producer: 2_000, consumer_ops: 4_000, capacity: 4, ..Default::default() };
    // Same workload on the seeded scheduler, with one producer stalled on
    // its first slot until the end.
    let seeded = WorkloadConfig { seed: Some(7), suspended: 1, ..threaded.clone() };

    for (name, cfg) in [("threaded", &threaded), ("seeded", &seeded)] {
        let rec = record_workload(cfg).unwrap();
        let verdict = check_mpsc_fifo(&rec.history).unwrap();
        println!("{name}: {} events, {} items delivered, {verdict}", rec.history.len(), rec.dequeued.len());
        if let (Some(path), "seeded") = (std::env::args().nth(1), name) {
            rec.history.write_jsonl(std::fs::File::create(&path).unwrap()).unwrap();
            println!("wrote {path}");
        }
    }
}
