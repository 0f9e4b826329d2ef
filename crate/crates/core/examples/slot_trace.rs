//! Traces every slot transition during a threaded run and validates that
//! each slot goes Empty, Set, Handled exactly once and in that order.
//!
//! cargo run --release --example slot_trace

use jiffy::lincheck::{check_slot_state_trace, record_workload, WorkloadConfig};
use jiffy::Role;

fn main() {
    let cfg = WorkloadConfig {
        producers: 4,
        ops_per_producer: 5_000,
        consumer_ops: 10_000,
        capacity: 4,
        trace_slots: true,
        ..Default::default()
    };
    let rec = record_workload(&cfg).unwrap();
    let trace = &rec.slot_trace;
    let by_consumer = trace.iter().filter(|e| e.role == Role::Consumer).count();
    println!("{} transitions ({} by producers, {by_consumer} by the consumer)", trace.len(), trace.len() - by_consumer);
    for e in trace.iter().take(4) {
        println!("  slot {}: {:?} -> {:?} by {:?}", e.index, e.from, e.to, e.role);
    }
    println!("{}", check_slot_state_trace(trace));
}
