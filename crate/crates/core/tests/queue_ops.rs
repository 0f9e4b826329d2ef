use jiffy::lincheck::{brute_force_linearizable, check_mpsc_fifo, History, HistoryEvent, Tag};
use jiffy::{Config, ConfigError, JiffyQueue, Reclaim, SlotState, WalkPhase};

fn states(q: &JiffyQueue<u32>, buffer: usize) -> Vec<SlotState> {
    q.inspect().buffers[buffer].states.clone()
}

#[test]
fn construction_validates_capacity() {
    let q = JiffyQueue::<u32>::new(1620).unwrap();
    assert_eq!(q.capacity(), 1620);
    assert!(q.is_empty());
    let q = JiffyQueue::<u32>::new(2).unwrap();
    let snap = q.inspect();
    assert_eq!((snap.head_position, snap.head_index, snap.tail, snap.tail_position), (1, 0, 0, 1));
    assert_eq!(JiffyQueue::<u32>::new(1).unwrap_err(), ConfigError::CapacityTooSmall(1));
    assert_eq!(JiffyQueue::<u32>::new(0).unwrap_err(), ConfigError::CapacityTooSmall(0));
}

#[test]
fn first_enqueue_sets_index_zero() {
    let q = JiffyQueue::new(8).unwrap();
    q.enqueue(7u32);
    assert_eq!(q.inspect().tail, 1);
    assert_eq!(states(&q, 0)[0], SlotState::Set);
    assert!(states(&q, 0)[1..].iter().all(|s| *s == SlotState::Empty));
}

#[test]
fn index_past_first_buffer_lands_at_start_of_second() {
    let mut q = JiffyQueue::new(1620).unwrap();
    for v in 0..1621u32 {
        q.enqueue(v);
    }
    let snap = q.inspect();
    assert_eq!(snap.positions()[..2], [1, 2]);
    assert_eq!(snap.buffers[1].states[0], SlotState::Set);
    assert_eq!(snap.buffers[1].states[1], SlotState::Empty);
    for v in 0..1621u32 {
        assert_eq!(q.dequeue(), Some(v));
    }
}

#[test]
fn second_slot_of_last_buffer_preallocates_successor() {
    let q = JiffyQueue::new(1620).unwrap();
    q.enqueue(0u32);
    assert_eq!(q.inspect().positions(), vec![1]);
    q.enqueue(1);
    assert_eq!(q.inspect().positions(), vec![1, 2]);
    assert_eq!(q.inspect().tail_position, 1);
}

#[test]
fn dequeue_on_fresh_and_single_item_queue() {
    let mut q = JiffyQueue::<u32>::new(4).unwrap();
    assert_eq!(q.dequeue(), None);
    q.enqueue(7);
    assert_eq!(q.dequeue(), Some(7));
    assert_eq!(q.dequeue(), None);
}

#[test]
fn stalled_head_is_skipped_and_left_in_place() {
    let mut q = JiffyQueue::new(8).unwrap();
    let stalled = q.reserve();
    assert_eq!(stalled.index(), 0);
    q.enqueue(2u32);
    assert_eq!(q.dequeue(), Some(2));
    let snap = q.inspect();
    assert_eq!(snap.head_index, 0);
    assert_eq!(&snap.buffers[0].states[..2], &[SlotState::Empty, SlotState::Handled]);
    stalled.complete(1);
    assert_eq!(q.dequeue(), Some(1));
    assert_eq!(q.dequeue(), None);
}

#[test]
fn earlier_index_wins_once_set() {
    // b reserves index 0 and a takes index 1; both are set before the dequeue.
    let mut q = JiffyQueue::new(8).unwrap();
    let rb = q.reserve();
    let a = q.producer();
    a.enqueue("a");
    rb.complete("b");
    assert_eq!(q.dequeue(), Some("b"));
    assert_eq!(q.dequeue(), Some("a"));

    // The same outcome as a history: enq(b) overlaps enq(a) and both finish
    // before the dequeues start.
    let (ta, tb) = (Tag::new(1, 0), Tag::new(2, 0));
    let h = History::new(vec![
        HistoryEvent::enqueue(2, tb, 1, 4),
        HistoryEvent::enqueue(1, ta, 2, 3),
        HistoryEvent::dequeue(0, Some(tb), 5, 6),
        HistoryEvent::dequeue(0, Some(ta), 7, 8),
    ]);
    assert!(brute_force_linearizable(&h).unwrap().is_linearizable());
    assert!(check_mpsc_fifo(&h).unwrap().is_linearizable());
}

#[test]
fn scan_reports_nothing_when_only_reservations_remain() {
    let mut q = JiffyQueue::<u32>::new(4).unwrap();
    let r0 = q.reserve();
    let r1 = q.reserve();
    assert_eq!(q.dequeue(), None);
    r1.complete(1);
    r0.complete(0);
    assert_eq!(q.dequeue(), Some(0));
    assert_eq!(q.dequeue(), Some(1));
}

#[test]
fn scan_skips_handled_to_reach_set() {
    let mut q = JiffyQueue::new(8).unwrap();
    let stalled = q.reserve();
    q.enqueue(1u32);
    q.enqueue(2);
    assert_eq!(q.dequeue(), Some(1));
    assert_eq!(&states(&q, 0)[..3], &[SlotState::Empty, SlotState::Handled, SlotState::Set]);
    let mut scanned = Vec::new();
    let got = q.dequeue_observed(&mut |s| {
        if s.phase == WalkPhase::Scan {
            scanned.push(s.index)
        }
    });
    assert_eq!(got, Some(2));
    assert_eq!(scanned, vec![0, 1, 2]);
    stalled.complete(0);
    assert_eq!(q.dequeue(), Some(0));
}

#[test]
fn fold_removes_handled_middle_buffer() {
    let mut q = JiffyQueue::with_config(Config::new().capacity(2).reclaim(Reclaim::AtDrop)).unwrap();
    let stalled = q.reserve();
    for v in 1..=4u32 {
        q.enqueue(v);
    }
    assert_eq!(q.inspect().positions(), vec![1, 2, 3]);
    for v in 1..=3 {
        assert_eq!(q.dequeue(), Some(v));
    }
    let freed = q.metrics().buffers_freed;
    assert_eq!(q.dequeue(), Some(4));
    assert_eq!(q.inspect().positions(), vec![1, 3]);
    let m = q.metrics();
    assert_eq!(m.folds_performed, 1);
    assert_eq!(m.buffers_freed, freed + 1);
    stalled.complete(0);
    assert_eq!(q.dequeue(), Some(0));
}

#[test]
fn fold_leaves_tail_buffer_alone() {
    let mut q = JiffyQueue::new(2).unwrap();
    let stalled = q.reserve();
    for v in 1..=3u32 {
        q.enqueue(v);
    }
    assert_eq!(q.inspect().tail_position, 2);
    for v in 1..=3 {
        assert_eq!(q.dequeue(), Some(v));
    }
    assert_eq!(q.dequeue(), None);
    assert_eq!(q.metrics().folds_performed, 0);
    assert!(q.inspect().positions().contains(&2));
    stalled.complete(0);
    assert_eq!(q.dequeue(), Some(0));
}

#[test]
fn two_consecutive_handled_buffers_are_both_folded() {
    let mut q = JiffyQueue::new(2).unwrap();
    let stalled = q.reserve(); // index 0, buffer 1
    for v in 1..=6u32 {
        q.enqueue(v); // indices 1..=6, buffers 1..=4
    }
    assert_eq!(q.inspect().positions(), vec![1, 2, 3, 4]);
    for v in 1..=3 {
        assert_eq!(q.dequeue(), Some(v));
    }
    let before = q.live_buffers();
    for v in 4..=6 {
        assert_eq!(q.dequeue(), Some(v));
    }
    assert_eq!(q.metrics().folds_performed, 2);
    assert_eq!(q.live_buffers(), before - 2);
    assert_eq!(q.inspect().positions()[..2], [1, 4]);
    stalled.complete(0);
    assert_eq!(q.dequeue(), Some(0));
    assert_eq!(q.dequeue(), None);
}

#[test]
fn rescan_restarts_on_newly_set_slot() {
    let mut q = JiffyQueue::new(8).unwrap();
    let r0 = q.reserve();
    let r1 = q.reserve();
    q.enqueue(2u32);
    let mut pending = Some(r1);
    let got = q.dequeue_observed(&mut |s| {
        if s.phase == WalkPhase::Rescan {
            if let Some(r) = pending.take() {
                r.complete(1);
            }
        }
    });
    assert_eq!(got, Some(1));
    assert!(q.metrics().dequeue_scan_restarts >= 1);
    r0.complete(0);
    assert_eq!(q.dequeue(), Some(0));
    assert_eq!(q.dequeue(), Some(2));
}

#[test]
fn rescan_without_changes_has_no_restarts() {
    let mut q = JiffyQueue::new(8).unwrap();
    let r0 = q.reserve();
    q.enqueue(1u32);
    assert_eq!(q.dequeue(), Some(1));
    assert_eq!(q.metrics().dequeue_scan_restarts, 0);
    r0.complete(0);
    assert_eq!(q.dequeue(), Some(0));
}

#[test]
fn rescan_settles_on_earliest_of_two_new_slots() {
    let mut q = JiffyQueue::new(8).unwrap();
    let r0 = q.reserve();
    let r1 = q.reserve();
    let r2 = q.reserve();
    q.enqueue(3u32);
    let mut pending = vec![r1, r2];
    let got = q.dequeue_observed(&mut |s| {
        if s.phase == WalkPhase::Rescan {
            // Set the later slot first, then the earlier one.
            while let Some(r) = pending.pop() {
                let v = r.index() as u32;
                r.complete(v);
            }
        }
    });
    assert_eq!(got, Some(1));
    r0.complete(0);
    assert_eq!(q.dequeue(), Some(0));
    assert_eq!(q.dequeue(), Some(2));
    assert_eq!(q.dequeue(), Some(3));
}

#[test]
fn head_advance_frees_old_buffer() {
    let mut q = JiffyQueue::new(2).unwrap();
    for v in 0..3u32 {
        q.enqueue(v);
    }
    assert_eq!(q.dequeue(), Some(0));
    let freed = q.metrics().buffers_freed;
    assert_eq!(q.dequeue(), Some(1));
    assert_eq!(q.metrics().buffers_freed, freed + 1);
    assert_eq!(q.inspect().head_position, 2);
}

#[test]
fn head_moves_into_preallocated_successor_lazily() {
    let mut q = JiffyQueue::with_config(Config::new().capacity(2)).unwrap();
    let p = q.producer();
    let r = p.reserve(); // index 0
    q.enqueue(1u32); // index 1 preallocates buffer 2
    assert_eq!(q.dequeue(), Some(1));
    r.complete(0);
    assert_eq!(q.dequeue(), Some(0));
    assert_eq!(q.inspect().head_position, 1);
    // The next call skips the handled slot, reaches the end of buffer 1 and
    // moves to the preallocated buffer before reporting empty.
    assert_eq!(q.dequeue(), None);
    assert_eq!(q.inspect().head_position, 2);
    assert_eq!(q.dequeue(), None);
    assert_eq!(q.inspect().head_position, 2);
}

#[test]
fn emptiness_tracks_reserved_indices() {
    let mut q = JiffyQueue::new(4).unwrap();
    assert!(q.is_empty());
    let r = q.reserve();
    assert!(!q.is_empty());
    r.complete(1u32);
    assert!(!q.is_empty());
    assert_eq!(q.dequeue(), Some(1));
    assert!(q.is_empty());
}

#[test]
fn unconsumed_items_are_dropped_with_the_queue() {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    struct Counted(Arc<AtomicUsize>);
    impl Drop for Counted {
        fn drop(&mut self) {
            self.0.fetch_add(1, Ordering::SeqCst);
        }
    }
    let drops = Arc::new(AtomicUsize::new(0));
    let metrics;
    {
        let mut q = JiffyQueue::new(2).unwrap();
        for _ in 0..7 {
            q.enqueue(Counted(Arc::clone(&drops)));
        }
        drop(q.dequeue());
        metrics = q.metrics_handle();
    }
    assert_eq!(drops.load(Ordering::SeqCst), 7);
    let m = metrics.snapshot();
    assert_eq!(m.buffers_allocated, m.buffers_freed);
    assert_eq!(m.metadata_retired + m.buffers_allocated - m.folds_performed, m.metadata_freed + m.metadata_retired);
    assert_eq!(m.faa_count, 7);
}

#[test]
fn producers_outlive_the_consumer_handle() {
    let q = JiffyQueue::new(4).unwrap();
    let p = q.producer();
    let metrics = q.metrics_handle();
    drop(q);
    for v in 0..10u32 {
        p.enqueue(v);
    }
    drop(p);
    let m = metrics.snapshot();
    assert_eq!(m.buffers_allocated, m.buffers_freed);
}
