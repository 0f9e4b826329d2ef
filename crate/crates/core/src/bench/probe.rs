use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::metrics::MetricsSnapshot;
use crate::queue::{Config, JiffyQueue};

/// Workload for [`memory_probe`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeConfig {
    pub producers: usize,
    pub capacity: usize,
    pub items_per_producer: u64,
    /// Reservations taken at evenly spread points in the stream and only
    /// completed after everything else has been consumed.
    pub stalled: usize,
    /// Consume concurrently with the producers. Otherwise the consumer starts
    /// once every producer has finished.
    pub balanced: bool,
    pub pool_limit: Option<usize>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            producers: 1,
            capacity: crate::DEFAULT_CAPACITY,
            items_per_producer: 10 * crate::DEFAULT_CAPACITY as u64,
            stalled: 0,
            balanced: false,
            pool_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryReport {
    /// Items enqueued, stalled ones included.
    pub items: u64,
    pub delivered: u64,
    pub peak_live_buffers: u64,
    /// Live buffers once every non-stalled item has been consumed, with the
    /// stalled reservations still open.
    pub settled_live_buffers: u64,
    /// Live buffers after the stalled reservations complete and the queue is
    /// drained.
    pub final_live_buffers: u64,
    /// `ceil(items / capacity) + producers + 1`.
    pub allocation_bound: u64,
    /// Consumer-side samples of the live count, balanced runs only.
    pub samples: u64,
    /// Samples above `ceil(pending / capacity) + producers + 1`, where
    /// `pending` is reserved indices not yet passed by the consumer head.
    pub bound_violations: u64,
    pub metrics: MetricsSnapshot,
}

impl MemoryReport {
    pub fn allocation_bound_holds(&self) -> bool {
        self.metrics.buffers_allocated <= self.allocation_bound
    }
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Runs the workload and reports how many slot arrays were live at the
/// interesting points.
pub fn memory_probe(cfg: &ProbeConfig) -> Result<MemoryReport, BenchError> {
    if cfg.producers == 0 {
        return Err(BenchError::InvalidConfig("producers must be at least 1".into()));
    }
    let mut qc = Config::new().capacity(cfg.capacity);
    qc.pool_limit = cfg.pool_limit;
    let mut q = JiffyQueue::<u64>::with_config(qc)?;
    let cap = cfg.capacity as u64;
    let active = cfg.producers as u64 * cfg.items_per_producer;
    let items = active + cfg.stalled as u64;
    let slack = cfg.producers as u64 + 1;
    let staller = q.producer();
    let delivered = AtomicU64::new(0);
    let (mut samples, mut violations) = (0u64, 0u64);

    let stalls = thread::scope(|s| {
        for p in 0..cfg.producers {
            let h = q.producer();
            s.spawn(move || {
                for i in 0..cfg.items_per_producer {
                    h.enqueue(((p as u64) << 40) | i);
                }
            });
        }
        let consumer = cfg.balanced.then(|| {
            let q = &mut q;
            let delivered = &delivered;
            s.spawn(move || {
                let (mut samples, mut violations) = (0u64, 0u64);
                while delivered.load(Ordering::Relaxed) < active {
                    let live = q.live_buffers();
                    let pending = q.tail_index() - q.consumer_index();
                    samples += 1;
                    if live > ceil_div(pending, cap) + slack {
                        violations += 1;
                    }
                    if q.dequeue().is_some() {
                        delivered.store(delivered.load(Ordering::Relaxed) + 1, Ordering::Relaxed);
                    } else {
                        thread::yield_now();
                    }
                }
                (samples, violations)
            })
        });
        let mut stalls = Vec::with_capacity(cfg.stalled);
        for k in 1..=cfg.stalled as u64 {
            let at = k * active / (cfg.stalled as u64 + 1);
            while staller.tail_index() < at {
                thread::yield_now();
            }
            stalls.push(staller.reserve());
        }
        if let Some(c) = consumer {
            (samples, violations) = c.join().expect("consumer panicked");
        }
        stalls
    });

    let mut got = delivered.load(Ordering::Relaxed);
    while got < active {
        if q.dequeue().is_some() {
            got += 1;
        }
    }
    // Further empty dequeues let the scan fold whatever the last one left.
    for _ in 0..2 {
        assert!(q.dequeue().is_none(), "unexpected item before stalled reservations complete");
    }
    let settled = q.live_buffers();

    for (i, r) in stalls.into_iter().enumerate() {
        r.complete(u64::MAX - i as u64);
    }
    while q.dequeue().is_some() {
        got += 1;
    }
    let metrics = q.metrics();
    Ok(MemoryReport {
        items,
        delivered: got,
        peak_live_buffers: metrics.peak_live_buffers,
        settled_live_buffers: settled,
        final_live_buffers: q.live_buffers(),
        allocation_bound: ceil_div(items, cap) + slack,
        samples,
        bound_violations: violations,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_drain_of_whole_buffers_leaves_one() {
        let r = memory_probe(&ProbeConfig { capacity: 4, items_per_producer: 40, ..Default::default() }).unwrap();
        assert_eq!(r.delivered, 40);
        assert_eq!(r.final_live_buffers, 1);
        assert!(r.allocation_bound_holds());
    }

    #[test]
    fn stalled_producer_keeps_its_buffer_only() {
        let r = memory_probe(&ProbeConfig { capacity: 4, items_per_producer: 40, stalled: 1, ..Default::default() })
            .unwrap();
        assert_eq!(r.delivered, 41);
        assert!(r.settled_live_buffers <= 3, "{r:?}");
    }
}
