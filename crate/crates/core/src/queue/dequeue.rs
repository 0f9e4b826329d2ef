//! Consumer path.
//!
//! The consumer keeps its own head (buffer and local index) and never writes
//! to anything a producer writes. When the head slot is still empty but
//! later slots are set, it scans forward for the first set slot, folding
//! away fully handled buffers on the way, then rescans from the head to pick
//! up any earlier slot that became set in the meantime.

use std::sync::atomic::Ordering;

use super::buffer::{first_index, Buffer, SlotArray, SlotState, HANDLED, SET};
use super::{ConsumerCore, JiffyQueue, Shared};
use crate::metrics::{DequeueScope, Metrics};
use crate::reclaim::Reclaim;
use crate::trace::{Role, SlotEvent};

/// Which part of a dequeue is about to read a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WalkPhase {
    /// Forward search for the first set slot.
    Scan,
    /// Re-check of the slots between the head and the candidate.
    Rescan,
}

/// Reported to a dequeue observer before each slot read during a walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WalkStep {
    pub phase: WalkPhase,
    /// Global index of the slot about to be read.
    pub index: u64,
}

type Observer<'a> = Option<&'a mut dyn FnMut(WalkStep)>;
type Cursor<T> = (*mut Buffer<T>, usize);

impl<T> JiffyQueue<T> {
    /// Removes the oldest available item, or `None` if there is none.
    pub fn dequeue(&mut self) -> Option<T> {
        let shared = &*self.shared;
        self.core.dequeue(shared, None)
    }

    /// Like [`dequeue`](Self::dequeue), but calls `observer` before every
    /// slot read made while searching past an empty head slot.
    ///
    /// The observer may enqueue or complete reservations on this queue, which
    /// makes otherwise rare interleavings reproducible on a single thread.
    pub fn dequeue_observed(&mut self, observer: &mut dyn FnMut(WalkStep)) -> Option<T> {
        let shared = &*self.shared;
        self.core.dequeue(shared, Some(observer))
    }

    /// True when every index claimed so far has been consumed. An enqueue
    /// that has claimed an index but not yet written it counts as pending.
    pub fn is_empty(&self) -> bool {
        let cap = self.shared.capacity;
        let (mut buf, mut idx) = (self.core.head_buf, self.core.head);
        // SAFETY: buffers reachable from the head stay allocated while the
        // consumer handle is borrowed.
        unsafe {
            loop {
                if idx == cap {
                    let next = (*buf).next.load(Ordering::SeqCst);
                    if next.is_null() {
                        break;
                    }
                    buf = next;
                    idx = 0;
                    continue;
                }
                if (*buf).slot(idx).load() != HANDLED {
                    break;
                }
                idx += 1;
            }
            first_index((*buf).position, cap) + idx as u64 >= self.shared.tail.load(Ordering::SeqCst)
        }
    }
}

impl<T> ConsumerCore<T> {
    #[inline]
    fn global(&self, (buf, idx): Cursor<T>, cap: usize) -> u64 {
        // SAFETY: cursors only point at live buffers.
        first_index(unsafe { (*buf).position }, cap) + idx as u64
    }

    pub(crate) fn dequeue(&mut self, sh: &Shared<T>, mut obs: Observer<'_>) -> Option<T> {
        let _scope = DequeueScope::enter();
        let cap = sh.capacity;
        let m = &*sh.metrics;

        // SAFETY: the head buffer and everything linked after it is live and
        // only released by this thread.
        unsafe {
            loop {
                if self.head == cap {
                    if !self.advance_head(sh) {
                        return self.empty(m);
                    }
                    continue;
                }
                match (*self.head_buf).slot(self.head).load() {
                    HANDLED => self.head += 1,
                    SET => {
                        let v = self.take(sh, (self.head_buf, self.head));
                        self.step_head(sh);
                        Metrics::bump_local(&m.dequeues, 1);
                        return Some(v);
                    }
                    _ => break,
                }
            }

            let head = (self.head_buf, self.head);
            let head_index = self.global(head, cap);
            let frontier = sh.tail.load(Ordering::SeqCst);
            if head_index >= frontier {
                return self.empty(m);
            }

            let mut visits = 0u64;
            let Some(found) = self.scan(sh, frontier, &mut obs, &mut visits) else {
                return self.empty(m);
            };
            let scan_visits = visits;
            let mut restarts = 0u64;
            let chosen = self.rescan(sh, found, &mut obs, &mut visits, &mut restarts);
            let found_index = self.global(found, cap);

            let v = self.take(sh, chosen);
            if chosen == head {
                self.step_head(sh);
            }

            Metrics::bump_local(&m.dequeues, 1);
            Metrics::bump_local(&m.dequeue_scan_restarts, restarts);
            Metrics::raise_local(&m.max_dequeue_steps, visits);
            if scan_visits > frontier - head_index || restarts > found_index - head_index {
                Metrics::bump_local(&m.dequeue_bound_violations, 1);
            }
            Some(v)
        }
    }

    fn empty(&mut self, m: &Metrics) -> Option<T> {
        Metrics::bump_local(&m.dequeues, 1);
        Metrics::bump_local(&m.empty_dequeues, 1);
        None
    }

    unsafe fn step_head(&mut self, sh: &Shared<T>) {
        self.head += 1;
        if self.head == sh.capacity {
            self.advance_head(sh);
        }
    }

    unsafe fn take(&mut self, sh: &Shared<T>, (buf, idx): Cursor<T>) -> T {
        let slot = (*buf).slot(idx);
        if sh.trace.is_some() {
            let index = self.global((buf, idx), sh.capacity);
            let from = SlotState::from_raw(slot.load());
            self.trace.push(SlotEvent { index, from, to: SlotState::Handled, role: Role::Consumer });
        }
        slot.take()
    }

    /// Finds the first set slot at or after the head and below `frontier`.
    /// Buffers entered during the walk that turn out to be fully handled are
    /// folded out of the list.
    unsafe fn scan(&mut self, sh: &Shared<T>, frontier: u64, obs: &mut Observer<'_>, visits: &mut u64) -> Option<Cursor<T>> {
        let cap = sh.capacity;
        let (mut buf, mut idx) = (self.head_buf, self.head);
        let mut entered = false;
        let mut all_handled = true;
        loop {
            if idx == cap {
                let next = (*buf).next.load(Ordering::SeqCst);
                if next.is_null() {
                    return None;
                }
                if entered && all_handled {
                    self.fold(sh, buf);
                }
                buf = next;
                idx = 0;
                entered = true;
                all_handled = true;
                continue;
            }
            let g = self.global((buf, idx), cap);
            if g >= frontier {
                return None;
            }
            if let Some(o) = obs.as_mut() {
                DequeueScope::suspended(|| o(WalkStep { phase: WalkPhase::Scan, index: g }));
            }
            *visits += 1;
            match (*buf).slot(idx).load() {
                SET => return Some((buf, idx)),
                HANDLED => {}
                _ => all_handled = false,
            }
            idx += 1;
        }
    }

    /// Walks from the head to `found`, restarting whenever an earlier slot
    /// has become set. Returns the earliest set slot seen last.
    unsafe fn rescan(
        &mut self,
        sh: &Shared<T>,
        found: Cursor<T>,
        obs: &mut Observer<'_>,
        visits: &mut u64,
        restarts: &mut u64,
    ) -> Cursor<T> {
        let cap = sh.capacity;
        let mut target = found;
        'restart: loop {
            let (mut buf, mut idx) = (self.head_buf, self.head);
            loop {
                if idx == cap {
                    buf = (*buf).next.load(Ordering::SeqCst);
                    idx = 0;
                }
                if (buf, idx) == target {
                    return target;
                }
                if let Some(o) = obs.as_mut() {
                    let index = self.global((buf, idx), cap);
                    DequeueScope::suspended(|| o(WalkStep { phase: WalkPhase::Rescan, index }));
                }
                *visits += 1;
                if (*buf).slot(idx).load() == SET {
                    target = (buf, idx);
                    *restarts += 1;
                    continue 'restart;
                }
                idx += 1;
            }
        }
    }

    /// Unlinks a fully handled buffer that is neither the head nor the tail.
    unsafe fn fold(&mut self, sh: &Shared<T>, buf: *mut Buffer<T>) -> bool {
        if buf == sh.tail_of_queue.load(Ordering::SeqCst) {
            return false;
        }
        let next = (*buf).next.load(Ordering::SeqCst);
        if next.is_null() {
            return false;
        }
        let prev = (*buf).prev.load(Ordering::SeqCst);
        (*next).prev.store(prev, Ordering::SeqCst);
        (*prev).next.store(next, Ordering::SeqCst);
        self.release_array(sh, buf);
        Metrics::bump_local(&sh.metrics.folds_performed, 1);
        let stamp = sh.grace.current();
        self.retire(sh, buf, Some(stamp));
        true
    }

    /// Moves the head into the next buffer once the current one is used up.
    unsafe fn advance_head(&mut self, sh: &Shared<T>) -> bool {
        let old = self.head_buf;
        let next = (*old).next.load(Ordering::SeqCst);
        if next.is_null() {
            return false;
        }
        // The old head may still be the published tail when its successor
        // was preallocated; its descriptor then waits until the tail moves.
        let still_tail = old == sh.tail_of_queue.load(Ordering::SeqCst);
        self.head_buf = next;
        self.head = 0;
        self.release_array(sh, old);
        let stamp = (!still_tail).then(|| sh.grace.current());
        self.retire(sh, old, stamp);
        self.sweep(sh, (*next).position);
        true
    }

    unsafe fn release_array(&mut self, sh: &Shared<T>, buf: *mut Buffer<T>) {
        let arr = SlotArray::from_raw((*buf).slots, sh.capacity);
        match &sh.pool {
            Some(pool) => {
                if let Err(arr) = pool.release(arr) {
                    arr.free();
                }
            }
            None => arr.free(),
        }
        Metrics::bump_local(&sh.metrics.buffers_released, 1);
    }

    unsafe fn retire(&mut self, sh: &Shared<T>, buf: *mut Buffer<T>, stamp: Option<u64>) {
        self.garbage.retire((*buf).position, stamp, buf);
        Metrics::bump_local(&sh.metrics.metadata_retired, 1);
    }

    fn sweep(&mut self, sh: &Shared<T>, boundary: u64) {
        if sh.reclaim == Reclaim::AtDrop {
            return;
        }
        sh.grace.try_advance();
        sh.grace.try_advance();
        let tail = sh.tail_of_queue.load(Ordering::SeqCst);
        let epoch = sh.grace.current();
        let freed = self.garbage.sweep(
            boundary,
            |e| match e.stamp {
                None => {
                    if e.record != tail {
                        e.stamp = Some(epoch);
                    }
                    false
                }
                Some(r) => sh.grace.is_expired(r),
            },
            // SAFETY: unlinked, array released, and no producer left that
            // could have seen it.
            |b| unsafe { drop(Box::from_raw(b)) },
        );
        Metrics::bump_local(&sh.metrics.metadata_freed, freed as u64);
    }

    #[cfg(test)]
    pub(crate) fn scan_for_test(&mut self, sh: &Shared<T>) -> Option<(u64, usize)> {
        let frontier = sh.tail.load(Ordering::SeqCst);
        let _scope = DequeueScope::enter();
        let mut visits = 0;
        unsafe { self.scan(sh, frontier, &mut None, &mut visits).map(|(b, i)| ((*b).position, i)) }
    }
}

#[cfg(test)]
mod tests {
    use crate::{Config, JiffyQueue, Reclaim, SlotState};

    #[test]
    fn head_slot_set_is_returned_directly() {
        let mut q = JiffyQueue::new(4).unwrap();
        q.enqueue(1);
        q.enqueue(2);
        assert_eq!(q.dequeue(), Some(1));
        assert_eq!(q.dequeue(), Some(2));
        assert_eq!(q.dequeue(), None);
        assert_eq!(q.metrics().dequeue_scan_restarts, 0);
    }

    #[test]
    fn scan_finds_first_set_after_handled() {
        let mut q = JiffyQueue::new(8).unwrap();
        let stalled = q.reserve();
        q.enqueue("x");
        q.enqueue("y");
        assert_eq!(q.dequeue(), Some("x"));
        let snap = q.inspect();
        assert_eq!(&snap.buffers[0].states[..3], &[SlotState::Empty, SlotState::Handled, SlotState::Set]);
        let shared = &*q.shared;
        assert_eq!(q.core.scan_for_test(shared), Some((1, 2)));
        stalled.complete("z");
    }

    #[test]
    fn fold_unlinks_handled_middle_buffer() {
        let mut q = JiffyQueue::with_config(Config::new().capacity(2).reclaim(Reclaim::AtDrop)).unwrap();
        let stalled = q.reserve(); // index 0, buffer 1
        for v in 1..=4 {
            q.enqueue(v); // indices 1..=4, buffers 1..=3
        }
        assert_eq!(q.inspect().positions(), vec![1, 2, 3]);
        assert_eq!(q.dequeue(), Some(1));
        assert_eq!(q.dequeue(), Some(2));
        assert_eq!(q.dequeue(), Some(3));
        // Buffer 2 is now fully handled; the next scan folds it.
        assert_eq!(q.dequeue(), Some(4));
        assert_eq!(q.inspect().positions(), vec![1, 3]);
        assert_eq!(q.metrics().folds_performed, 1);
        stalled.complete(0);
        assert_eq!(q.dequeue(), Some(0));
        assert_eq!(q.dequeue(), None);
    }

    #[test]
    fn fold_refuses_tail_buffer() {
        let mut q = JiffyQueue::new(2).unwrap();
        let stalled = q.reserve(); // 0
        q.enqueue(1); // 1, preallocates buffer 2
        q.enqueue(2); // 2 in buffer 2
        q.enqueue(3); // 3 in buffer 2, preallocates buffer 3; tail stays at 2
        assert_eq!(q.inspect().tail_position, 2);
        assert_eq!(q.dequeue(), Some(1));
        assert_eq!(q.dequeue(), Some(2));
        assert_eq!(q.dequeue(), Some(3));
        assert_eq!(q.dequeue(), None);
        assert_eq!(q.metrics().folds_performed, 0);
        stalled.complete(0);
        assert_eq!(q.dequeue(), Some(0));
    }

    #[test]
    fn rescan_prefers_slot_that_became_set_earlier() {
        let mut q = JiffyQueue::new(8).unwrap();
        let r0 = q.reserve();
        let r1 = q.reserve();
        q.enqueue(2);
        let mut pending = Some(r1);
        let got = q.dequeue_observed(&mut |step| {
            if step.phase == super::WalkPhase::Rescan {
                if let Some(r) = pending.take() {
                    r.complete(1);
                }
            }
        });
        assert_eq!(got, Some(1));
        assert_eq!(q.metrics().dequeue_scan_restarts, 1);
        r0.complete(0);
        assert_eq!(q.dequeue(), Some(0));
        assert_eq!(q.dequeue(), Some(2));
        assert_eq!(q.metrics().dequeue_rmw_count, 0);
    }

    #[test]
    fn head_moves_past_tail_buffer_once_successor_exists() {
        let mut q = JiffyQueue::new(4).unwrap();
        for v in 0..4 {
            q.enqueue(v);
        }
        // Index 1 preallocated buffer 2, but the tail never reached it.
        assert_eq!(q.inspect().tail_position, 1);
        for v in 0..4 {
            assert_eq!(q.dequeue(), Some(v));
        }
        assert_eq!(q.live_buffers(), 1);
        assert_eq!(q.inspect().positions(), vec![2]);
        assert_eq!(q.garbage_len(), 1);
        q.enqueue(9);
        assert_eq!(q.dequeue(), Some(9));
    }
}
