//! Helpers shared by the integration tests.
#![allow(dead_code)]

use jiffy::lincheck::{History, HistoryEvent, Tag};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random well-formed history of `n` operations: distinct enqueue values,
/// non-overlapping dequeues, unique timestamps. Dequeue results are drawn
/// from the enqueued values, empty, or occasionally a value never enqueued.
pub fn random_history<R: Rng>(rng: &mut R, n: usize) -> History {
    loop {
        let mut ts: Vec<u64> = (1..=2 * n as u64).collect();
        ts.shuffle(rng);
        let mut events = Vec::with_capacity(n);
        let mut values = Vec::new();
        let kinds: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        for (i, &is_enq) in kinds.iter().enumerate() {
            let (a, b) = (ts[2 * i], ts[2 * i + 1]);
            let (inv, ret) = (a.min(b), a.max(b));
            if is_enq {
                let p = rng.gen_range(0..3u32);
                let tag = Tag::new(p, i as u64);
                values.push(tag);
                events.push(HistoryEvent::enqueue(p + 1, tag, inv, ret));
            } else {
                events.push(HistoryEvent::dequeue(0, None, inv, ret));
            }
        }
        for e in events.iter_mut().filter(|e| e.op == jiffy::lincheck::Op::Dequeue) {
            let roll = rng.gen_range(0..10);
            e.value = if roll < 3 || values.is_empty() {
                None
            } else if roll == 9 {
                Some(Tag::new(9, 999))
            } else {
                values.choose(rng).copied()
            };
        }
        let h = History::new(events);
        if h.validate().is_ok() {
            return h;
        }
    }
}
