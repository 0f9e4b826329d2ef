//! Single-thread use: items come back in the order they went in.
//!
//! cargo run --example basic_fifo

use jiffy::JiffyQueue;

fn main() {
    // A tiny capacity makes the buffer chain visible.
    let mut q = JiffyQueue::new(4).unwrap();
    for v in 0..10 {
        q.enqueue(v);
    }
    println!("buffers in the chain: {:?}", q.inspect().positions());

    let out: Vec<i32> = std::iter::from_fn(|| q.dequeue()).collect();
    println!("dequeued: {out:?}");
    assert_eq!(out, (0..10).collect::<Vec<_>>());
    assert!(q.is_empty());

    let m = q.metrics();
    println!("buffers allocated {}, freed {}, live {}", m.buffers_allocated, m.buffers_freed, q.live_buffers());
}
