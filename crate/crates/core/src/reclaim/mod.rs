//! Memory reclamation: retired descriptor bookkeeping, the epoch tracker that
//! guards descriptor release, and the optional slot-array pool.

pub(crate) mod garbage;
pub(crate) mod grace;
pub(crate) mod pool;

pub(crate) use garbage::GarbageList;
pub(crate) use grace::Grace;
pub(crate) use pool::BufferPool;

/// When retired buffer descriptors are returned to the allocator.
///
/// Slot arrays are always released as soon as the consumer is done with
/// them. This only governs the small descriptors that producers may still be
/// traversing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reclaim {
    /// Free once the head has passed the descriptor's position and every
    /// producer that could have seen it has left the queue.
    #[default]
    Deferred,
    /// Keep every descriptor until the queue is dropped.
    AtDrop,
}
