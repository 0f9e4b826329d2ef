//! Several producer threads feed one consumer. Each producer's items stay in
//! order and every item arrives exactly once.
//!
//! cargo run --release --example mpsc_threads -- [producers] [items-per-producer]

use std::thread;
use std::time::Instant;

use jiffy::JiffyQueue;

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().expect("numeric argument"));
    let producers = args.next().unwrap_or(4);
    let per = args.next().unwrap_or(250_000);

    let mut q = JiffyQueue::new(jiffy::DEFAULT_CAPACITY).unwrap();
    let start = Instant::now();
    let mut last = vec![None::<u64>; producers as usize];
    let mut received = 0;
    thread::scope(|s| {
        for id in 0..producers {
            let p = q.producer();
            s.spawn(move || {
                for seq in 0..per {
                    p.enqueue((id, seq));
                }
            });
        }
        while received < producers * per {
            if let Some((id, seq)) = q.dequeue() {
                let prev = last[id as usize].replace(seq);
                assert!(prev.map_or(seq == 0, |p| p + 1 == seq), "producer {id} out of order");
                received += 1;
            }
        }
    });
    assert_eq!(q.dequeue(), None);

    let elapsed = start.elapsed();
    let m = q.metrics();
    println!("{received} items from {producers} producers in {elapsed:.2?}");
    println!(
        "buffers allocated {}, folds {}, consumer read-modify-writes {}",
        m.buffers_allocated, m.folds_performed, m.dequeue_rmw_count
    );
}
