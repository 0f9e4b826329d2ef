//! Bounded hand-off pool of retired slot arrays.
//!
//! The consumer is the only thread that releases arrays into the pool and it
//! does so with a load and a store. Producers take arrays out with a swap.
//! Every entry has the capacity the pool was built for.

use std::ptr;
use std::sync::atomic::{AtomicPtr, Ordering};

use crossbeam_utils::CachePadded;

use crate::metrics::{note_rmw, Metrics};
use crate::queue::buffer::{Slot, SlotArray};

pub(crate) struct BufferPool<T> {
    entries: Box<[CachePadded<AtomicPtr<Slot<T>>>]>,
    array_len: usize,
}

impl<T> BufferPool<T> {
    pub(crate) fn new(limit: usize, array_len: usize) -> Self {
        BufferPool {
            entries: (0..limit).map(|_| CachePadded::new(AtomicPtr::new(ptr::null_mut()))).collect(),
            array_len,
        }
    }

    /// Takes a pooled array of `len` slots, reset to `Empty`. `None` on a
    /// miss or a capacity mismatch.
    pub(crate) fn acquire(&self, len: usize, metrics: &Metrics) -> Option<SlotArray<T>> {
        if len != self.array_len {
            return None;
        }
        for e in self.entries.iter() {
            if e.load(Ordering::Acquire).is_null() {
                continue;
            }
            note_rmw(metrics);
            let p = e.swap(ptr::null_mut(), Ordering::Acquire);
            if !p.is_null() {
                // SAFETY: only arrays of `array_len` slots enter the pool.
                let arr = unsafe { SlotArray::from_raw(p, len) };
                arr.reset();
                return Some(arr);
            }
        }
        None
    }

    /// Consumer only. Hands the array back if the pool is full or the
    /// capacity does not match.
    pub(crate) fn release(&self, arr: SlotArray<T>) -> Result<(), SlotArray<T>> {
        if arr.len() != self.array_len {
            return Err(arr);
        }
        for e in self.entries.iter() {
            if e.load(Ordering::Acquire).is_null() {
                e.store(arr.into_raw(), Ordering::Release);
                return Ok(());
            }
        }
        Err(arr)
    }

    pub(crate) fn len(&self) -> usize {
        self.entries.iter().filter(|e| !e.load(Ordering::Acquire).is_null()).count()
    }

    #[cfg(test)]
    pub(crate) fn limit(&self) -> usize {
        self.entries.len()
    }
}

impl<T> Drop for BufferPool<T> {
    fn drop(&mut self) {
        for e in self.entries.iter() {
            let p = e.swap(ptr::null_mut(), Ordering::Acquire);
            if !p.is_null() {
                // SAFETY: see `acquire`.
                unsafe { SlotArray::from_raw(p, self.array_len) }.free();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acquire_from_empty_pool_misses() {
        let m = Metrics::default();
        let pool: BufferPool<u64> = BufferPool::new(8, 4);
        assert!(pool.acquire(4, &m).is_none());
    }

    #[test]
    fn release_then_acquire_reuses_the_same_array() {
        let m = Metrics::default();
        let pool: BufferPool<u64> = BufferPool::new(8, 4);
        let arr = SlotArray::alloc(4);
        let addr = arr.as_ptr();
        unsafe { (*addr).publish(9) };
        assert!(pool.release(arr).is_ok());
        let again = pool.acquire(4, &m).expect("hit");
        assert_eq!(again.as_ptr(), addr);
        unsafe { assert_eq!((*again.as_ptr()).load(), crate::queue::buffer::EMPTY) };
        again.free();
    }

    #[test]
    fn capacity_mismatch_is_a_miss() {
        let m = Metrics::default();
        let pool: BufferPool<u64> = BufferPool::new(8, 4);
        assert!(pool.release(SlotArray::alloc(4)).is_ok());
        assert!(pool.acquire(8, &m).is_none());
        assert_eq!(pool.len(), 1);
        let wrong = SlotArray::<u64>::alloc(8);
        let back = pool.release(wrong).expect_err("mismatch goes to the allocator");
        back.free();
    }

    #[test]
    fn full_pool_rejects_release() {
        let pool: BufferPool<u64> = BufferPool::new(2, 4);
        assert!(pool.release(SlotArray::alloc(4)).is_ok());
        assert!(pool.release(SlotArray::alloc(4)).is_ok());
        let rejected = pool.release(SlotArray::alloc(4)).expect_err("pool is full");
        rejected.free();
        assert_eq!(pool.len(), pool.limit());
    }

    #[test]
    fn n_releases_cover_n_acquires() {
        let m = Metrics::default();
        let pool: BufferPool<u64> = BufferPool::new(8, 4);
        for _ in 0..5 {
            assert!(pool.release(SlotArray::alloc(4)).is_ok());
        }
        let taken: Vec<_> = (0..5).map(|_| pool.acquire(4, &m).expect("hit")).collect();
        assert!(pool.acquire(4, &m).is_none());
        taken.into_iter().for_each(SlotArray::free);
    }
}
