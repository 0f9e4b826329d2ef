//! Recycling slot arrays through the pool. The output is identical with and
//! without it; only the allocator traffic changes.
//!
//! cargo run --example buffer_pool

use jiffy::{Config, JiffyQueue};

fn churn(q: &mut JiffyQueue<u64>, rounds: u64) -> Vec<u64> {
    let mut out = Vec::new();
    for r in 0..rounds {
        for i in 0..64 {
            q.enqueue(r * 64 + i);
        }
        out.extend(std::iter::from_fn(|| q.dequeue()));
    }
    out
}

fn main() {
    let mut plain = JiffyQueue::new(16).unwrap();
    let mut pooled = JiffyQueue::with_config(Config::new().capacity(16).pool(8)).unwrap();
    assert_eq!(churn(&mut plain, 100), churn(&mut pooled, 100));

    for (name, q) in [("plain", &plain), ("pooled", &pooled)] {
        let m = q.metrics();
        println!(
            "{name:>6}: {} arrays in service, {} from the allocator, {} from the pool",
            m.buffers_allocated, m.fresh_allocations, m.pool_hits
        );
    }
    println!("pool currently holds {:?} arrays", pooled.pooled_buffers());
}
