//! Producer path.
//!
//! An enqueue claims a global index with one fetch-and-add, then walks from
//! the published tail buffer to the buffer holding that index: forwards
//! (appending buffers as needed) or backwards along `prev` links when the
//! tail has already moved past it. The walk is bounded by the distance
//! between the tail buffer seen on entry and the target.

use std::ptr;
use std::sync::atomic::Ordering;

use super::buffer::{first_index, locate, SlotState};
use super::buffer::{Buffer, SlotArray};
use super::{Shared, Spare};
use crate::metrics::note_rmw;
use crate::trace::{Role, SlotEvent};

impl<T> Shared<T> {
    #[inline]
    pub(crate) fn reserve(&self) -> u64 {
        note_rmw(&self.metrics);
        self.tail.fetch_add(1, Ordering::SeqCst)
    }

    /// Tries to link `fresh` after `buf`. Returns the successor actually in
    /// place. If another producer won, the array of `fresh` goes to `spare`.
    ///
    /// # Safety
    /// `buf` is protected by the caller's grace guard; `fresh` is unpublished.
    unsafe fn append(&self, buf: *mut Buffer<T>, fresh: *mut Buffer<T>, spare: &Spare<T>) -> *mut Buffer<T> {
        let m = &*self.metrics;
        m.add(&m.cas_attempts, 1);
        note_rmw(m);
        match (*buf).next.compare_exchange(ptr::null_mut(), fresh, Ordering::SeqCst, Ordering::SeqCst) {
            Ok(_) => fresh,
            Err(winner) => {
                m.add(&m.cas_failures, 1);
                let lost = Box::from_raw(fresh);
                spare.keep(SlotArray::from_raw(lost.slots, self.capacity));
                winner
            }
        }
    }

    /// Second half of an enqueue: writes `value` at global index `index`.
    pub(crate) fn publish(&self, index: u64, value: T, spare: &Spare<T>) {
        let m = &*self.metrics;
        let _guard = self.grace.enter(m);

        // SAFETY: every descriptor reached below was reachable after our
        // grace entry, so the consumer will not free it before we leave.
        unsafe {
            let mut buf = self.tail_of_queue.load(Ordering::SeqCst);
            let entry_position = (*buf).position;
            // Most indices land in the tail buffer; skip the division then.
            let offset = index.wrapping_sub(first_index(entry_position, self.capacity));
            let (target, local) = if offset < self.capacity as u64 {
                (entry_position, offset as usize)
            } else {
                locate(index, self.capacity)
            };
            let mut forward = 0u64;
            while (*buf).position < target {
                forward += 1;
                let mut next = (*buf).next.load(Ordering::SeqCst);
                if next.is_null() {
                    let fresh = self.new_buffer((*buf).position + 1, buf, spare);
                    next = self.append(buf, fresh, spare);
                }
                m.add(&m.cas_attempts, 1);
                note_rmw(m);
                buf = match self.tail_of_queue.compare_exchange(buf, next, Ordering::SeqCst, Ordering::SeqCst) {
                    Ok(_) => next,
                    Err(current) => {
                        m.add(&m.cas_failures, 1);
                        current
                    }
                };
            }

            let landed = (*buf).position;
            let mut backward = 0u64;
            while target < (*buf).position {
                buf = (*buf).prev.load(Ordering::SeqCst);
                backward += 1;
            }
            let is_last = backward == 0;
            debug_assert_eq!((*buf).position, target, "target buffer skipped");

            let steps = forward + backward;
            let bound = target.saturating_sub(entry_position) + (landed - target);
            m.raise(&m.max_enqueue_steps, steps);
            if steps > bound {
                m.add(&m.enqueue_bound_violations, 1);
            }

            // Preallocate the successor before publishing: once the slot is
            // set the consumer may pass this buffer and release it.
            if local == 1 && is_last && (*buf).next.load(Ordering::SeqCst).is_null() {
                let fresh = self.new_buffer((*buf).position + 1, buf, spare);
                self.append(buf, fresh, spare);
            }

            let slot = (*buf).slot(local);
            let observed = slot.load();
            slot.publish(value);
            if let Some(trace) = &self.trace {
                trace.record(SlotEvent {
                    index,
                    from: SlotState::from_raw(observed),
                    to: SlotState::Set,
                    role: Role::Producer,
                });
            }
        }
    }
}
