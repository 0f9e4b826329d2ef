//! A producer that claims a slot and stalls does not block the queue. The
//! consumer serves later items around the hole and unlinks buffers it has
//! fully drained behind it.
//!
//! cargo run --example stalled_producer

use jiffy::JiffyQueue;

fn show(label: &str, q: &JiffyQueue<u32>) {
    let snap = q.inspect();
    println!("{label}: buffers {:?}, live {}", snap.positions(), q.live_buffers());
}

fn main() {
    let mut q = JiffyQueue::new(2).unwrap();
    let stalled = q.reserve();
    println!("stalled producer holds index {}", stalled.index());
    for v in 1..=7 {
        q.enqueue(v);
    }
    show("before", &q);

    let served: Vec<u32> = std::iter::from_fn(|| q.dequeue()).collect();
    println!("served around the hole: {served:?}");
    show("after", &q);
    println!("buffers folded: {}", q.metrics().folds_performed);

    stalled.complete(0);
    assert_eq!(q.dequeue(), Some(0));
    assert_eq!(q.dequeue(), None);
    show("after the stall ends", &q);
}
