//! Two-phase epoch tracking that lets the consumer decide when no producer
//! can still hold a pointer to a retired buffer descriptor.
//!
//! Each thread owns an announcement record in a process-wide registry. On
//! entry a producer stores the address of the queue's `Grace` tagged with the
//! parity of the epoch it observed; on exit it clears the record with a plain
//! store. The consumer advances the epoch only when no record names its queue
//! with the previous parity, using nothing but loads and a store. A
//! descriptor retired in epoch `r` is unreachable by every producer once the
//! epoch has reached `r + 2`.

use std::ptr;
use std::sync::atomic::{AtomicBool, AtomicPtr, AtomicU64, AtomicUsize, Ordering};

use crossbeam_utils::CachePadded;

use crate::metrics::{note_rmw, Metrics};

pub(crate) const STRIPES: usize = 16;

static NEXT_STRIPE: AtomicUsize = AtomicUsize::new(0);

thread_local! {
    static STRIPE: usize = NEXT_STRIPE.fetch_add(1, Ordering::Relaxed) % STRIPES;
}

/// Stripe index of the calling thread, stable for its lifetime.
pub(crate) fn stripe() -> usize {
    STRIPE.with(|s| *s)
}

/// One thread's announcement. Records are never freed; a record released by
/// an exiting thread is claimed by the next thread that needs one.
struct Record {
    state: CachePadded<AtomicUsize>,
    owned: AtomicBool,
    next: *const Record,
}

// SAFETY: `next` is written once before the record is published and never
// changes; the record itself is leaked and lives for the whole process.
unsafe impl Sync for Record {}

static RECORDS: AtomicPtr<Record> = AtomicPtr::new(ptr::null_mut());

fn records() -> impl Iterator<Item = &'static Record> {
    let mut cur = RECORDS.load(Ordering::Acquire) as *const Record;
    std::iter::from_fn(move || {
        // SAFETY: published records are leaked, so the pointer stays valid.
        let r = unsafe { cur.as_ref()? };
        cur = r.next;
        Some(r)
    })
}

fn claim() -> &'static Record {
    if let Some(r) = records().find(|r| {
        !r.owned.load(Ordering::Relaxed)
            && r.owned.compare_exchange(false, true, Ordering::Acquire, Ordering::Relaxed).is_ok()
    }) {
        return r;
    }
    let fresh = Box::leak(Box::new(Record {
        state: CachePadded::new(AtomicUsize::new(0)),
        owned: AtomicBool::new(true),
        next: ptr::null(),
    }));
    let mut head = RECORDS.load(Ordering::Relaxed);
    loop {
        fresh.next = head;
        match RECORDS.compare_exchange_weak(head, fresh, Ordering::Release, Ordering::Relaxed) {
            Ok(_) => return fresh,
            Err(h) => head = h,
        }
    }
}

fn release(r: &Record) {
    r.owned.store(false, Ordering::Release);
}

struct Local(&'static Record);

impl Drop for Local {
    fn drop(&mut self) {
        release(self.0);
    }
}

thread_local! {
    static LOCAL: Local = Local(claim());
}

pub(crate) struct Grace {
    epoch: CachePadded<AtomicU64>,
}

pub(crate) struct GraceGuard {
    record: &'static Record,
    /// Claimed for this guard only, because the thread-local was gone.
    borrowed: bool,
}

impl Grace {
    pub(crate) fn new() -> Self {
        Grace { epoch: CachePadded::new(AtomicU64::new(0)) }
    }

    /// Record value announcing a producer inside this queue under `epoch`.
    /// `Grace` is cache-line aligned, so the low bit of its address is free.
    fn tag(&self, epoch: u64) -> usize {
        self as *const Grace as usize | (epoch & 1) as usize
    }

    /// Producer entry. Must precede any load of a shared buffer pointer.
    #[inline]
    pub(crate) fn enter(&self, metrics: &Metrics) -> GraceGuard {
        let (record, borrowed) = LOCAL.try_with(|l| (l.0, false)).unwrap_or_else(|_| (claim(), true));
        let e = self.epoch.load(Ordering::SeqCst);
        note_rmw(metrics);
        record.state.store(self.tag(e), Ordering::SeqCst);
        GraceGuard { record, borrowed }
    }

    /// Current epoch. Exact when called by the consumer, the only writer.
    pub(crate) fn current(&self) -> u64 {
        self.epoch.load(Ordering::SeqCst)
    }

    /// Consumer only. Moves to the next epoch if every producer that entered
    /// under the previous parity has left.
    pub(crate) fn try_advance(&self) -> bool {
        let e = self.epoch.load(Ordering::Relaxed);
        let blocking = self.tag(e + 1);
        if records().all(|r| r.state.load(Ordering::SeqCst) != blocking) {
            self.epoch.store(e + 1, Ordering::SeqCst);
            true
        } else {
            false
        }
    }

    /// Whether a descriptor retired in `retired_epoch` may be freed now.
    pub(crate) fn is_expired(&self, retired_epoch: u64) -> bool {
        self.current() >= retired_epoch + 2
    }
}

impl Drop for GraceGuard {
    #[inline]
    fn drop(&mut self) {
        self.record.state.store(0, Ordering::Release);
        if self.borrowed {
            release(self.record);
        }
    }
}
