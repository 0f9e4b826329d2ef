//! Slots, slot arrays and buffer descriptors.

use std::cell::UnsafeCell;
use std::mem::MaybeUninit;
use std::ptr::{self, NonNull};
use std::sync::atomic::{AtomicPtr, AtomicU8, Ordering};

use serde::{Deserialize, Serialize};

pub(crate) const EMPTY: u8 = 0;
pub(crate) const SET: u8 = 1;
pub(crate) const HANDLED: u8 = 2;

/// Lifecycle of a queue slot: `Empty -> Set -> Handled`, never backwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotState {
    Empty,
    Set,
    Handled,
}

impl SlotState {
    pub(crate) fn from_raw(raw: u8) -> SlotState {
        match raw {
            EMPTY => SlotState::Empty,
            SET => SlotState::Set,
            HANDLED => SlotState::Handled,
            other => unreachable!("invalid slot state {other}"),
        }
    }
}

pub(crate) struct Slot<T> {
    pub(crate) state: AtomicU8,
    value: UnsafeCell<MaybeUninit<T>>,
}

impl<T> Slot<T> {
    fn new() -> Self {
        Slot { state: AtomicU8::new(EMPTY), value: UnsafeCell::new(MaybeUninit::uninit()) }
    }

    #[inline]
    pub(crate) fn load(&self) -> u8 {
        self.state.load(Ordering::Acquire)
    }

    /// Writes the payload and publishes the slot.
    ///
    /// # Safety
    /// The caller owns this slot's global index and the slot is `Empty`.
    #[inline]
    pub(crate) unsafe fn publish(&self, value: T) {
        debug_assert_eq!(self.state.load(Ordering::Relaxed), EMPTY);
        (*self.value.get()).write(value);
        self.state.store(SET, Ordering::Release);
    }

    /// Moves the payload out and marks the slot handled.
    ///
    /// # Safety
    /// Consumer only, and the slot must have been observed `Set`.
    #[inline]
    pub(crate) unsafe fn take(&self) -> T {
        debug_assert_eq!(self.state.load(Ordering::Relaxed), SET);
        let value = (*self.value.get()).assume_init_read();
        self.state.store(HANDLED, Ordering::Release);
        value
    }
}

/// Owning handle to a heap array of slots. Not `Drop`: arrays travel through
/// raw pointers and are released explicitly.
pub(crate) struct SlotArray<T> {
    ptr: NonNull<Slot<T>>,
    len: usize,
}

impl<T> SlotArray<T> {
    pub(crate) fn alloc(len: usize) -> Self {
        let slots: Box<[Slot<T>]> = (0..len).map(|_| Slot::new()).collect();
        let ptr = Box::into_raw(slots) as *mut Slot<T>;
        // SAFETY: Box::into_raw never returns null.
        SlotArray { ptr: unsafe { NonNull::new_unchecked(ptr) }, len }
    }

    /// # Safety
    /// `ptr` must come from [`SlotArray::into_raw`] with the same `len`.
    pub(crate) unsafe fn from_raw(ptr: *mut Slot<T>, len: usize) -> Self {
        SlotArray { ptr: NonNull::new_unchecked(ptr), len }
    }

    pub(crate) fn into_raw(self) -> *mut Slot<T> {
        self.ptr.as_ptr()
    }

    #[cfg(test)]
    pub(crate) fn as_ptr(&self) -> *mut Slot<T> {
        self.ptr.as_ptr()
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    /// Marks every slot `Empty` again. Requires exclusive ownership, which
    /// the handle itself represents.
    pub(crate) fn reset(&self) {
        for i in 0..self.len {
            // SAFETY: i < len.
            unsafe { (*self.ptr.as_ptr().add(i)).state.store(EMPTY, Ordering::Relaxed) };
        }
    }

    /// Drops payloads that were published but never consumed.
    pub(crate) fn drop_unconsumed(&self) {
        for i in 0..self.len {
            // SAFETY: i < len; exclusive ownership.
            unsafe {
                let slot = &*self.ptr.as_ptr().add(i);
                if slot.state.load(Ordering::Acquire) == SET {
                    (*slot.value.get()).assume_init_drop();
                    slot.state.store(HANDLED, Ordering::Relaxed);
                }
            }
        }
    }

    /// Returns the memory to the allocator. Payloads are not dropped.
    pub(crate) fn free(self) {
        // SAFETY: ptr/len came from a boxed slice.
        unsafe { drop(Box::from_raw(ptr::slice_from_raw_parts_mut(self.ptr.as_ptr(), self.len))) };
    }
}

/// Buffer descriptor. The slot pointer is fixed at construction; `next` and
/// `prev` are rewired by appends and folds.
pub(crate) struct Buffer<T> {
    pub(crate) slots: *mut Slot<T>,
    pub(crate) next: AtomicPtr<Buffer<T>>,
    pub(crate) prev: AtomicPtr<Buffer<T>>,
    pub(crate) position: u64,
}

impl<T> Buffer<T> {
    pub(crate) fn boxed(slots: SlotArray<T>, position: u64, prev: *mut Buffer<T>) -> *mut Buffer<T> {
        Box::into_raw(Box::new(Buffer {
            slots: slots.into_raw(),
            next: AtomicPtr::new(ptr::null_mut()),
            prev: AtomicPtr::new(prev),
            position,
        }))
    }

    /// # Safety
    /// `idx` is below the queue capacity and the array has not been released.
    #[inline]
    pub(crate) unsafe fn slot(&self, idx: usize) -> &Slot<T> {
        &*self.slots.add(idx)
    }
}

/// Maps a global index to `(buffer position, local index)`. Positions are
/// 1-based.
#[inline]
pub(crate) fn locate(index: u64, capacity: usize) -> (u64, usize) {
    let cap = capacity as u64;
    (index / cap + 1, (index % cap) as usize)
}

/// First global index held by the buffer at `position`.
#[inline]
pub(crate) fn first_index(position: u64, capacity: usize) -> u64 {
    (position - 1) * capacity as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_matches_division() {
        assert_eq!(locate(0, 1620), (1, 0));
        assert_eq!(locate(1619, 1620), (1, 1619));
        assert_eq!(locate(1620, 1620), (2, 0));
        assert_eq!(locate(5, 2), (3, 1));
        assert_eq!(first_index(3, 2), 4);
    }

    #[test]
    fn slot_round_trip() {
        let arr: SlotArray<String> = SlotArray::alloc(2);
        unsafe {
            let s = &*arr.as_ptr();
            assert_eq!(s.load(), EMPTY);
            s.publish("x".to_string());
            assert_eq!(s.load(), SET);
            assert_eq!(s.take(), "x");
            assert_eq!(s.load(), HANDLED);
            (*arr.as_ptr().add(1)).publish("left".to_string());
        }
        arr.drop_unconsumed();
        arr.reset();
        unsafe { assert_eq!((*arr.as_ptr().add(1)).load(), EMPTY) };
        arr.free();
    }
}
