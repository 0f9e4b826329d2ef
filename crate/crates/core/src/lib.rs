//! A wait-free multi-producer single-consumer queue.
//!
//! Items live in a linked list of fixed-size buffers. Producers claim a
//! global slot index with a single fetch-and-add and write the item into the
//! buffer that owns it; buffers are appended on demand, with the second
//! slot of the last buffer triggering allocation of the next one ahead of
//! time. The single consumer never issues an atomic read-modify-write. When
//! a slow producer leaves a hole at the head, the consumer serves later
//! items around it and unlinks buffers it has fully drained.
//!
//! ```
//! use jiffy::JiffyQueue;
//!
//! let mut q = JiffyQueue::new(1620).unwrap();
//! let p = q.producer();
//! std::thread::spawn(move || p.enqueue(7)).join().unwrap();
//! assert_eq!(q.dequeue(), Some(7));
//! assert_eq!(q.dequeue(), None);
//! ```
//!
//! Besides the queue, the crate ships the tools used to validate and measure
//! it: a linearizability checker for single-consumer FIFO histories
//! ([`lincheck`]) and a throughput harness with a mutex baseline
//! ([`bench`]).

pub mod bench;
pub mod lincheck;
pub mod metrics;
pub mod queue;
mod reclaim;
pub mod trace;

pub use metrics::{Metrics, MetricsSnapshot};
pub use queue::{
    BufferSnapshot, Config, ConfigError, JiffyQueue, Producer, QueueSnapshot, Reservation, SlotState, WalkPhase,
    WalkStep, DEFAULT_CAPACITY, DEFAULT_POOL_LIMIT,
};
pub use reclaim::Reclaim;
pub use trace::{Role, SlotEvent};
