//! Live buffer counts for a full drain, for a run with stalled producers,
//! and for a balanced run sampled against the pending-items bound.
//!
//! cargo run --release --example memory_probe

use jiffy::bench::{memory_probe, ProbeConfig};

fn main() {
    let cases = [
        ("full drain", ProbeConfig { producers: 4, capacity: 16, items_per_producer: 4_000, ..Default::default() }),
        (
            "two stalled",
            ProbeConfig { producers: 4, capacity: 16, items_per_producer: 4_000, stalled: 2, ..Default::default() },
        ),
        (
            "balanced",
            ProbeConfig { producers: 4, capacity: 16, items_per_producer: 50_000, balanced: true, ..Default::default() },
        ),
    ];
    for (name, cfg) in cases {
        let r = memory_probe(&cfg).unwrap();
        println!(
            "{name:>11}: peak {} live, {} after draining, {} at the end, allocation bound {} ({}), {} of {} samples over the bound",
            r.peak_live_buffers,
            r.settled_live_buffers,
            r.final_live_buffers,
            r.allocation_bound,
            if r.allocation_bound_holds() { "held" } else { "exceeded" },
            r.bound_violations,
            r.samples,
        );
    }
}
