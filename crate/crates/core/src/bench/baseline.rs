//! Lock-based queue used as the throughput baseline.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex, MutexGuard};

/// A `VecDeque` behind one mutex, with the same producer/consumer split as
/// [`crate::JiffyQueue`].
#[derive(Debug)]
pub struct MutexQueue<T> {
    inner: Arc<Mutex<VecDeque<T>>>,
}

/// Producer handle for [`MutexQueue`].
#[derive(Debug)]
pub struct MutexProducer<T> {
    inner: Arc<Mutex<VecDeque<T>>>,
}

impl<T> Clone for MutexProducer<T> {
    fn clone(&self) -> Self {
        MutexProducer { inner: Arc::clone(&self.inner) }
    }
}

fn lock<T>(m: &Mutex<VecDeque<T>>) -> MutexGuard<'_, VecDeque<T>> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl<T> Default for MutexQueue<T> {
    fn default() -> Self {
        MutexQueue { inner: Arc::new(Mutex::new(VecDeque::new())) }
    }
}

impl<T> MutexQueue<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn producer(&self) -> MutexProducer<T> {
        MutexProducer { inner: Arc::clone(&self.inner) }
    }

    pub fn enqueue(&self, value: T) {
        lock(&self.inner).push_back(value);
    }

    pub fn dequeue(&mut self) -> Option<T> {
        lock(&self.inner).pop_front()
    }

    pub fn len(&self) -> usize {
        lock(&self.inner).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<T> MutexProducer<T> {
    pub fn enqueue(&self, value: T) {
        lock(&self.inner).push_back(value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo() {
        let mut q = MutexQueue::new();
        let p = q.producer();
        p.enqueue(1);
        q.enqueue(2);
        assert_eq!(q.len(), 2);
        assert_eq!(q.dequeue(), Some(1));
        assert_eq!(q.dequeue(), Some(2));
        assert_eq!(q.dequeue(), None);
    }
}
