//! Watches the consumer's scan and rescan while producers complete out of
//! order.
//!
//! cargo run --example walk_observer

use jiffy::{JiffyQueue, WalkPhase, WalkStep};

fn main() {
    let mut q = JiffyQueue::new(8).unwrap();
    let slow: Vec<_> = (0..3).map(|_| q.reserve()).collect();
    q.enqueue("late");
    let mut slow = slow.into_iter();
    let first = slow.next().unwrap();

    // The consumer finds index 3 first. While it rechecks the slots before
    // it, the producer of index 1 finishes, so the rescan restarts there.
    let mut mid = slow.next();
    let mut steps = Vec::new();
    let got = q.dequeue_observed(&mut |step: WalkStep| {
        steps.push(step);
        if step.phase == WalkPhase::Rescan {
            if let Some(r) = mid.take() {
                r.complete("middle");
            }
        }
    });
    for s in &steps {
        println!("{:?} reads index {}", s.phase, s.index);
    }
    println!("returned {got:?}");

    first.complete("first");
    slow.next().unwrap().complete("last");
    let rest: Vec<_> = std::iter::from_fn(|| q.dequeue()).collect();
    println!("then {rest:?}");
}
