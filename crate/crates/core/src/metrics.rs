//! Activity counters for a queue instance.
//!
//! Counters written by producers use atomic read-modify-write updates.
//! Counters owned by the consumer are only ever written by the consumer, so
//! they are updated with a plain load followed by a store. That keeps the
//! dequeue path free of read-modify-write instructions, which is what
//! [`MetricsSnapshot::dequeue_rmw_count`] verifies.

use std::cell::Cell;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

thread_local! {
    static IN_DEQUEUE: Cell<bool> = const { Cell::new(false) };
}

/// Marks the current thread as executing the consumer path until dropped.
///
/// Debug builds count every read-modify-write issued by the crate while the
/// marker is set.
pub(crate) struct DequeueScope {
    prev: bool,
}

impl DequeueScope {
    pub(crate) fn enter() -> Self {
        DequeueScope { prev: IN_DEQUEUE.with(|c| c.replace(true)) }
    }

    /// Runs `f` outside the consumer scope. Used around user observers, which
    /// may legitimately run producer code on the consumer thread.
    pub(crate) fn suspended<R>(f: impl FnOnce() -> R) -> R {
        let prev = IN_DEQUEUE.with(|c| c.replace(false));
        let out = f();
        IN_DEQUEUE.with(|c| c.set(prev));
        out
    }
}

impl Drop for DequeueScope {
    fn drop(&mut self) {
        IN_DEQUEUE.with(|c| c.set(self.prev));
    }
}

/// Live counters shared by all handles of one queue.
#[derive(Debug, Default)]
pub struct Metrics {
    // Producer side.
    pub(crate) buffers_allocated: AtomicU64,
    pub(crate) fresh_allocations: AtomicU64,
    pub(crate) pool_hits: AtomicU64,
    pub(crate) pool_misses: AtomicU64,
    pub(crate) buffers_discarded: AtomicU64,
    pub(crate) spare_reuses: AtomicU64,
    pub(crate) cas_attempts: AtomicU64,
    pub(crate) cas_failures: AtomicU64,
    pub(crate) peak_live_buffers: AtomicU64,
    pub(crate) max_enqueue_steps: AtomicU64,
    pub(crate) enqueue_bound_violations: AtomicU64,

    // Consumer side: single writer.
    pub(crate) buffers_released: AtomicU64,
    pub(crate) folds_performed: AtomicU64,
    pub(crate) metadata_retired: AtomicU64,
    pub(crate) metadata_freed: AtomicU64,
    pub(crate) dequeues: AtomicU64,
    pub(crate) empty_dequeues: AtomicU64,
    pub(crate) dequeue_scan_restarts: AtomicU64,
    pub(crate) max_dequeue_steps: AtomicU64,
    pub(crate) dequeue_bound_violations: AtomicU64,
    pub(crate) dequeue_rmw_count: AtomicU64,

    pub(crate) faa_at_drop: AtomicU64,
}

impl Metrics {
    /// Read-modify-write increment. Producer counters only.
    #[inline]
    pub(crate) fn add(&self, counter: &AtomicU64, n: u64) {
        note_rmw(self);
        counter.fetch_add(n, Ordering::Relaxed);
    }

    #[inline]
    pub(crate) fn raise(&self, counter: &AtomicU64, value: u64) {
        if counter.load(Ordering::Relaxed) < value {
            note_rmw(self);
            counter.fetch_max(value, Ordering::Relaxed);
        }
    }

    /// Single-writer increment for consumer-owned counters.
    #[inline]
    pub(crate) fn bump_local(counter: &AtomicU64, n: u64) {
        counter.store(counter.load(Ordering::Relaxed) + n, Ordering::Relaxed);
    }

    #[inline]
    pub(crate) fn raise_local(counter: &AtomicU64, value: u64) {
        if counter.load(Ordering::Relaxed) < value {
            counter.store(value, Ordering::Relaxed);
        }
    }

    /// Slot arrays currently allocated and not yet released.
    pub(crate) fn live_buffers(&self) -> u64 {
        let allocated = self.buffers_allocated.load(Ordering::SeqCst);
        let freed = self.buffers_released.load(Ordering::SeqCst)
            + self.buffers_discarded.load(Ordering::SeqCst);
        allocated.saturating_sub(freed)
    }

    /// Snapshot of all counters.
    ///
    /// `faa_count` is only known to this handle once the queue has been
    /// dropped; use [`crate::JiffyQueue::metrics`] for a live value.
    pub fn snapshot(&self) -> MetricsSnapshot {
        self.snapshot_with_faa(self.faa_at_drop.load(Ordering::SeqCst))
    }

    pub(crate) fn snapshot_with_faa(&self, faa_count: u64) -> MetricsSnapshot {
        let ld = |c: &AtomicU64| c.load(Ordering::SeqCst);
        let released = ld(&self.buffers_released);
        let discarded = ld(&self.buffers_discarded);
        MetricsSnapshot {
            buffers_allocated: ld(&self.buffers_allocated),
            buffers_freed: released + discarded,
            buffers_discarded: discarded,
            fresh_allocations: ld(&self.fresh_allocations),
            pool_hits: ld(&self.pool_hits),
            pool_misses: ld(&self.pool_misses),
            spare_reuses: ld(&self.spare_reuses),
            folds_performed: ld(&self.folds_performed),
            metadata_retired: ld(&self.metadata_retired),
            metadata_freed: ld(&self.metadata_freed),
            cas_attempts: ld(&self.cas_attempts),
            cas_failures: ld(&self.cas_failures),
            faa_count,
            dequeues: ld(&self.dequeues),
            empty_dequeues: ld(&self.empty_dequeues),
            dequeue_rmw_count: ld(&self.dequeue_rmw_count),
            dequeue_scan_restarts: ld(&self.dequeue_scan_restarts),
            peak_live_buffers: ld(&self.peak_live_buffers),
            max_enqueue_steps: ld(&self.max_enqueue_steps),
            enqueue_bound_violations: ld(&self.enqueue_bound_violations),
            max_dequeue_steps: ld(&self.max_dequeue_steps),
            dequeue_bound_violations: ld(&self.dequeue_bound_violations),
        }
    }
}

#[inline]
pub(crate) fn note_rmw(_m: &Metrics) {
    #[cfg(debug_assertions)]
    if IN_DEQUEUE.with(|c| c.get()) {
        Metrics::bump_local(&_m.dequeue_rmw_count, 1);
    }
}

/// Point-in-time copy of [`Metrics`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    /// Slot arrays put into service, fresh or from the pool.
    pub buffers_allocated: u64,
    /// Slot arrays taken out of service: folded, passed by the head,
    /// dropped as a spare, or released at drop.
    pub buffers_freed: u64,
    /// Arrays freed by producers: spares dropped with their handle.
    pub buffers_discarded: u64,
    /// Appends that reused the array kept from a lost append race.
    pub spare_reuses: u64,
    /// Arrays obtained from the global allocator.
    pub fresh_allocations: u64,
    pub pool_hits: u64,
    pub pool_misses: u64,
    pub folds_performed: u64,
    /// Buffer descriptors handed to the garbage list.
    pub metadata_retired: u64,
    /// Buffer descriptors actually deallocated.
    pub metadata_freed: u64,
    pub cas_attempts: u64,
    pub cas_failures: u64,
    /// Fetch-and-add operations on the global tail, one per enqueue.
    pub faa_count: u64,
    pub dequeues: u64,
    pub empty_dequeues: u64,
    /// Read-modify-write instructions issued by the consumer. Always zero;
    /// debug builds count any that slip in.
    pub dequeue_rmw_count: u64,
    pub dequeue_scan_restarts: u64,
    pub peak_live_buffers: u64,
    /// Largest number of buffer hops taken by a single enqueue.
    pub max_enqueue_steps: u64,
    pub enqueue_bound_violations: u64,
    /// Largest number of slot visits taken by a single dequeue.
    pub max_dequeue_steps: u64,
    pub dequeue_bound_violations: u64,
}

impl MetricsSnapshot {
    /// Arrays allocated and not yet freed.
    pub fn live_buffers(&self) -> u64 {
        self.buffers_allocated.saturating_sub(self.buffers_freed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_bump_is_plain_store() {
        let m = Metrics::default();
        let _scope = DequeueScope::enter();
        Metrics::bump_local(&m.dequeues, 3);
        Metrics::raise_local(&m.max_dequeue_steps, 7);
        Metrics::raise_local(&m.max_dequeue_steps, 2);
        let s = m.snapshot();
        assert_eq!(s.dequeues, 3);
        assert_eq!(s.max_dequeue_steps, 7);
        assert_eq!(s.dequeue_rmw_count, 0);
    }

    #[cfg(debug_assertions)]
    #[test]
    fn rmw_inside_dequeue_scope_is_counted() {
        let m = Metrics::default();
        m.add(&m.cas_attempts, 1);
        assert_eq!(m.snapshot().dequeue_rmw_count, 0);
        {
            let _scope = DequeueScope::enter();
            m.add(&m.cas_attempts, 1);
            DequeueScope::suspended(|| m.add(&m.cas_attempts, 1));
        }
        m.add(&m.cas_attempts, 1);
        assert_eq!(m.snapshot().dequeue_rmw_count, 1);
        assert_eq!(m.snapshot().cas_attempts, 4);
    }

    #[test]
    fn live_is_allocated_minus_freed() {
        let s = MetricsSnapshot { buffers_allocated: 5, buffers_freed: 3, ..Default::default() };
        assert_eq!(s.live_buffers(), 2);
    }
}
