//! The queue: a linked list of fixed-size slot buffers indexed by a global
//! fetch-and-add counter.
//!
//! [`JiffyQueue`] is the single consumer handle; it can enqueue too. Any
//! number of [`Producer`] handles can be created from it and moved to other
//! threads. Producers finish every enqueue in a bounded number of steps, and
//! the consumer never executes an atomic read-modify-write instruction.

pub(crate) mod buffer;
mod dequeue;
mod enqueue;

use std::fmt;
use std::ptr;
use std::sync::atomic::{AtomicPtr, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crossbeam_utils::CachePadded;
use thiserror::Error;

use crate::metrics::{Metrics, MetricsSnapshot};
use crate::reclaim::{BufferPool, GarbageList, Grace, Reclaim};
use crate::trace::{ProducerTrace, SlotEvent};

pub use buffer::SlotState;
pub use dequeue::{WalkPhase, WalkStep};

use buffer::{first_index, Buffer, Slot, SlotArray};

/// Default number of slots per buffer.
pub const DEFAULT_CAPACITY: usize = 1620;

/// Default number of slot arrays the pool keeps when enabled.
pub const DEFAULT_POOL_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("buffer capacity must be at least 2, got {0}")]
    CapacityTooSmall(usize),
    #[error("pool limit must be at least 1")]
    EmptyPool,
}

/// Queue construction options.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    /// Slots per buffer. At least 2, because the second slot of the last
    /// buffer triggers allocation of its successor.
    pub capacity: usize,
    /// Recycle slot arrays through a pool of this many entries.
    pub pool_limit: Option<usize>,
    pub reclaim: Reclaim,
    /// Record every slot transition for later checking.
    pub trace_slots: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config { capacity: DEFAULT_CAPACITY, pool_limit: None, reclaim: Reclaim::Deferred, trace_slots: false }
    }
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn capacity(mut self, capacity: usize) -> Self {
        self.capacity = capacity;
        self
    }

    pub fn pool(mut self, limit: usize) -> Self {
        self.pool_limit = Some(limit);
        self
    }

    pub fn reclaim(mut self, reclaim: Reclaim) -> Self {
        self.reclaim = reclaim;
        self
    }

    pub fn trace_slots(mut self, on: bool) -> Self {
        self.trace_slots = on;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.capacity < 2 {
            return Err(ConfigError::CapacityTooSmall(self.capacity));
        }
        if self.pool_limit == Some(0) {
            return Err(ConfigError::EmptyPool);
        }
        Ok(())
    }
}

/// Consumer-owned state. Lives in the consumer handle and is handed to the
/// shared block when that handle is dropped.
pub(crate) struct ConsumerCore<T> {
    pub(crate) head_buf: *mut Buffer<T>,
    pub(crate) head: usize,
    pub(crate) garbage: GarbageList<*mut Buffer<T>>,
    pub(crate) trace: Vec<SlotEvent>,
}

pub(crate) struct Shared<T> {
    pub(crate) tail: CachePadded<AtomicU64>,
    pub(crate) tail_of_queue: CachePadded<AtomicPtr<Buffer<T>>>,
    pub(crate) capacity: usize,
    pub(crate) grace: Grace,
    pub(crate) pool: Option<BufferPool<T>>,
    pub(crate) reclaim: Reclaim,
    pub(crate) trace: Option<ProducerTrace>,
    pub(crate) metrics: Arc<Metrics>,
    orphan: Mutex<Option<ConsumerCore<T>>>,
}

// SAFETY: payloads cross threads by value; every shared pointer is managed by
// the protocol documented on the enqueue and dequeue paths.
unsafe impl<T: Send> Send for Shared<T> {}
unsafe impl<T: Send> Sync for Shared<T> {}

impl<T> Shared<T> {
    /// Puts a slot array into service: the caller's spare if it has one,
    /// else pooled if possible, else fresh.
    pub(crate) fn new_buffer(&self, position: u64, prev: *mut Buffer<T>, spare: &Spare<T>) -> *mut Buffer<T> {
        let m = &*self.metrics;
        if let Some(arr) = spare.take() {
            m.add(&m.spare_reuses, 1);
            return Buffer::boxed(arr, position, prev);
        }
        let arr = match self.pool.as_ref().and_then(|p| p.acquire(self.capacity, m)) {
            Some(arr) => {
                m.add(&m.pool_hits, 1);
                arr
            }
            None => {
                if self.pool.is_some() {
                    m.add(&m.pool_misses, 1);
                }
                m.add(&m.fresh_allocations, 1);
                SlotArray::alloc(self.capacity)
            }
        };
        m.add(&m.buffers_allocated, 1);
        m.raise(&m.peak_live_buffers, m.live_buffers());
        Buffer::boxed(arr, position, prev)
    }

    fn metrics_snapshot(&self) -> MetricsSnapshot {
        self.metrics.snapshot_with_faa(self.tail.load(Ordering::SeqCst))
    }
}

/// At most one unpublished slot array, kept by a producer handle after it
/// lost an append race and used for its next append. This caps the arrays
/// wasted on races at one per handle over the queue's lifetime.
pub(crate) struct Spare<T> {
    slot: CachePadded<AtomicPtr<Slot<T>>>,
    capacity: usize,
    metrics: Arc<Metrics>,
}

// SAFETY: the array is unpublished and handed over whole through the atomic.
unsafe impl<T: Send> Send for Spare<T> {}
unsafe impl<T: Send> Sync for Spare<T> {}

impl<T> Spare<T> {
    fn new(shared: &Shared<T>) -> Arc<Self> {
        Arc::new(Spare {
            slot: CachePadded::new(AtomicPtr::new(ptr::null_mut())),
            capacity: shared.capacity,
            metrics: Arc::clone(&shared.metrics),
        })
    }

    fn take(&self) -> Option<SlotArray<T>> {
        let p = self.slot.swap(ptr::null_mut(), Ordering::AcqRel);
        // SAFETY: only arrays of `capacity` slots are stored here.
        (!p.is_null()).then(|| unsafe { SlotArray::from_raw(p, self.capacity) })
    }

    /// Keeps `arr`, freeing whatever was kept before. Two spares only meet
    /// when threads share one handle.
    pub(crate) fn keep(&self, arr: SlotArray<T>) {
        let old = self.slot.swap(arr.into_raw(), Ordering::AcqRel);
        if !old.is_null() {
            // SAFETY: as in `take`.
            unsafe { SlotArray::from_raw(old, self.capacity) }.free();
            self.metrics.add(&self.metrics.buffers_discarded, 1);
        }
    }
}

impl<T> Drop for Spare<T> {
    fn drop(&mut self) {
        if let Some(arr) = self.take() {
            arr.free();
            self.metrics.add(&self.metrics.buffers_discarded, 1);
        }
    }
}

impl<T> Drop for Shared<T> {
    fn drop(&mut self) {
        let m = &*self.metrics;
        m.faa_at_drop.store(*self.tail.get_mut(), Ordering::SeqCst);
        let core = self.orphan.get_mut().unwrap_or_else(|e| e.into_inner()).take();
        let Some(mut core) = core else { return };
        let mut cur = core.head_buf;
        while !cur.is_null() {
            // SAFETY: exclusive access; every linked buffer is live.
            unsafe {
                let b = Box::from_raw(cur);
                let arr = SlotArray::from_raw(b.slots, self.capacity);
                arr.drop_unconsumed();
                arr.free();
                Metrics::bump_local(&m.buffers_released, 1);
                Metrics::bump_local(&m.metadata_freed, 1);
                cur = b.next.load(Ordering::Relaxed);
            }
        }
        core.garbage.drain_all(|b| {
            // SAFETY: retired descriptors are unlinked and their arrays gone.
            unsafe { drop(Box::from_raw(b)) };
            Metrics::bump_local(&m.metadata_freed, 1);
        });
    }
}

/// The consumer handle. Dequeue needs `&mut self`, so there is exactly one
/// consumer at a time; enqueue works through `&self`.
pub struct JiffyQueue<T> {
    shared: Arc<Shared<T>>,
    spare: Arc<Spare<T>>,
    core: ConsumerCore<T>,
}

// SAFETY: consumer state is only mutated through `&mut self`.
unsafe impl<T: Send> Send for JiffyQueue<T> {}
unsafe impl<T: Send> Sync for JiffyQueue<T> {}

impl<T> JiffyQueue<T> {
    /// Queue with `capacity` slots per buffer.
    pub fn new(capacity: usize) -> Result<Self, ConfigError> {
        Self::with_config(Config::default().capacity(capacity))
    }

    pub fn with_config(config: Config) -> Result<Self, ConfigError> {
        config.validate()?;
        let metrics = Arc::new(Metrics::default());
        let shared = Arc::new(Shared {
            tail: CachePadded::new(AtomicU64::new(0)),
            tail_of_queue: CachePadded::new(AtomicPtr::new(ptr::null_mut())),
            capacity: config.capacity,
            grace: Grace::new(),
            pool: config.pool_limit.map(|l| BufferPool::new(l, config.capacity)),
            reclaim: config.reclaim,
            trace: config.trace_slots.then(ProducerTrace::new),
            metrics,
            orphan: Mutex::new(None),
        });
        let spare = Spare::new(&shared);
        let first = shared.new_buffer(1, ptr::null_mut(), &spare);
        shared.tail_of_queue.store(first, Ordering::SeqCst);
        Ok(JiffyQueue {
            shared,
            spare,
            core: ConsumerCore { head_buf: first, head: 0, garbage: GarbageList::default(), trace: Vec::new() },
        })
    }

    /// Slots per buffer.
    pub fn capacity(&self) -> usize {
        self.shared.capacity
    }

    /// Global index of the consumer's head slot. Every index below it has
    /// been handled.
    pub fn consumer_index(&self) -> u64 {
        // SAFETY: the head buffer is owned by the consumer.
        let pos = unsafe { (*self.core.head_buf).position };
        first_index(pos, self.shared.capacity) + self.core.head as u64
    }

    /// Reserved indices so far, one per enqueue or reservation.
    pub fn tail_index(&self) -> u64 {
        self.shared.tail.load(Ordering::SeqCst)
    }

    /// A new producer handle for this queue.
    pub fn producer(&self) -> Producer<T> {
        Producer { spare: Spare::new(&self.shared), shared: Arc::clone(&self.shared) }
    }

    /// Appends `value`. Wait-free.
    pub fn enqueue(&self, value: T) {
        let index = self.shared.reserve();
        self.shared.publish(index, value, &self.spare);
    }

    /// First half of an enqueue: claims the next global index. See
    /// [`Reservation`].
    pub fn reserve(&self) -> Reservation<T> {
        Reservation { index: self.shared.reserve(), shared: Arc::clone(&self.shared), spare: Arc::clone(&self.spare) }
    }

    pub fn metrics(&self) -> MetricsSnapshot {
        self.shared.metrics_snapshot()
    }

    /// Counters that stay readable after the queue is gone.
    pub fn metrics_handle(&self) -> Arc<Metrics> {
        Arc::clone(&self.shared.metrics)
    }

    /// Slot arrays currently allocated.
    pub fn live_buffers(&self) -> u64 {
        self.shared.metrics.live_buffers()
    }

    /// Descriptors waiting in the garbage list.
    pub fn garbage_len(&self) -> usize {
        self.core.garbage.len()
    }

    /// Arrays currently held by the pool, if enabled.
    pub fn pooled_buffers(&self) -> Option<usize> {
        self.shared.pool.as_ref().map(|p| p.len())
    }

    /// Takes the slot transitions recorded so far. Empty unless the queue was
    /// built with [`Config::trace_slots`].
    pub fn take_slot_trace(&mut self) -> Vec<SlotEvent> {
        let mut out = std::mem::take(&mut self.core.trace);
        if let Some(t) = &self.shared.trace {
            t.drain_into(&mut out);
        }
        out
    }

    /// Copy of the buffer list from the head onwards.
    pub fn inspect(&self) -> QueueSnapshot {
        let cap = self.shared.capacity;
        let mut buffers = Vec::new();
        let mut cur = self.core.head_buf;
        while !cur.is_null() {
            // SAFETY: buffers reachable from the head are only released by
            // the consumer, which `&self` excludes.
            unsafe {
                let b = &*cur;
                let states = (0..cap).map(|i| SlotState::from_raw(b.slot(i).load())).collect();
                buffers.push(BufferSnapshot { position: b.position, states });
                cur = b.next.load(Ordering::SeqCst);
            }
        }
        let tq = self.shared.tail_of_queue.load(Ordering::SeqCst);
        QueueSnapshot {
            // SAFETY: as above; the tail descriptor is never freed while
            // it is the tail.
            head_position: unsafe { (*self.core.head_buf).position },
            head_index: self.core.head,
            tail: self.shared.tail.load(Ordering::SeqCst),
            tail_position: unsafe { (*tq).position },
            buffers,
        }
    }
}

impl<T> Default for JiffyQueue<T> {
    fn default() -> Self {
        Self::with_config(Config::default()).expect("default config is valid")
    }
}

impl<T> Drop for JiffyQueue<T> {
    fn drop(&mut self) {
        let core = ConsumerCore {
            head_buf: self.core.head_buf,
            head: self.core.head,
            garbage: std::mem::take(&mut self.core.garbage),
            trace: Vec::new(),
        };
        *self.shared.orphan.lock().unwrap_or_else(|e| e.into_inner()) = Some(core);
    }
}

impl<T> fmt::Debug for JiffyQueue<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JiffyQueue")
            .field("capacity", &self.shared.capacity)
            .field("tail", &self.shared.tail.load(Ordering::Relaxed))
            .field("head_index", &self.core.head)
            .finish()
    }
}

/// Producer handle. Cheap to clone, `Send` and `Sync`.
pub struct Producer<T> {
    shared: Arc<Shared<T>>,
    spare: Arc<Spare<T>>,
}

impl<T> Clone for Producer<T> {
    fn clone(&self) -> Self {
        Producer { spare: Spare::new(&self.shared), shared: Arc::clone(&self.shared) }
    }
}

impl<T> Producer<T> {
    /// Appends `value`. Wait-free.
    pub fn enqueue(&self, value: T) {
        let index = self.shared.reserve();
        self.shared.publish(index, value, &self.spare);
    }

    /// First half of an enqueue: claims the next global index.
    pub fn reserve(&self) -> Reservation<T> {
        Reservation { index: self.shared.reserve(), shared: Arc::clone(&self.shared), spare: Arc::clone(&self.spare) }
    }

    /// Reserved indices so far, across all handles.
    pub fn tail_index(&self) -> u64 {
        self.shared.tail.load(Ordering::SeqCst)
    }
}

impl<T> fmt::Debug for Producer<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Producer").finish_non_exhaustive()
    }
}

/// A claimed but unpublished slot.
///
/// Splitting an enqueue makes a slow producer observable: the slot stays
/// `Empty` until [`Reservation::complete`] runs, and the consumer skips past
/// it meanwhile. A reservation dropped without completing leaves the slot
/// empty for good; the consumer skips it and it is reclaimed with its buffer.
#[must_use = "the slot stays empty until the reservation is completed"]
pub struct Reservation<T> {
    shared: Arc<Shared<T>>,
    spare: Arc<Spare<T>>,
    index: u64,
}

impl<T> Reservation<T> {
    /// Global index of the claimed slot.
    pub fn index(&self) -> u64 {
        self.index
    }

    /// Writes `value` into the claimed slot.
    pub fn complete(self, value: T) {
        self.shared.publish(self.index, value, &self.spare);
    }
}

impl<T> fmt::Debug for Reservation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Reservation").field("index", &self.index).finish()
    }
}

/// Buffer list as seen by [`JiffyQueue::inspect`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueueSnapshot {
    pub head_position: u64,
    pub head_index: usize,
    /// Value of the global index counter.
    pub tail: u64,
    /// Position of the buffer producers currently start from.
    pub tail_position: u64,
    pub buffers: Vec<BufferSnapshot>,
}

impl QueueSnapshot {
    pub fn positions(&self) -> Vec<u64> {
        self.buffers.iter().map(|b| b.position).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BufferSnapshot {
    pub position: u64,
    pub states: Vec<SlotState>,
}
