//! Concurrent histories and their line-oriented file format.
//!
//! Each event is one JSON object per line:
//!
//! ```text
//! {"op":"enq","thread":2,"producer":1,"seq":0,"empty":false,"invoke_ts":10,"return_ts":42}
//! {"op":"deq","thread":0,"producer":0,"seq":0,"empty":true,"invoke_ts":50,"return_ts":51}
//! ```
//!
//! Timestamps are nanoseconds (or logical ticks) from a clock that is
//! strictly increasing across all threads.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identity of an enqueued value: which producer, and its sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tag {
    pub producer: u32,
    pub seq: u64,
}

impl Tag {
    pub fn new(producer: u32, seq: u64) -> Self {
        Tag { producer, seq }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "enq")]
    Enqueue,
    #[serde(rename = "deq")]
    Dequeue,
}

/// One completed operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HistoryEvent {
    pub op: Op,
    pub thread: u32,
    /// Enqueued value, dequeued value, or `None` for an empty dequeue.
    pub value: Option<Tag>,
    pub invoke_ts: u64,
    pub return_ts: u64,
}

impl HistoryEvent {
    pub fn enqueue(thread: u32, value: Tag, invoke_ts: u64, return_ts: u64) -> Self {
        HistoryEvent { op: Op::Enqueue, thread, value: Some(value), invoke_ts, return_ts }
    }

    pub fn dequeue(thread: u32, value: Option<Tag>, invoke_ts: u64, return_ts: u64) -> Self {
        HistoryEvent { op: Op::Dequeue, thread, value, invoke_ts, return_ts }
    }

    /// Real-time precedence: `self` returned before `other` was invoked.
    pub fn precedes(&self, other: &HistoryEvent) -> bool {
        self.return_ts < other.invoke_ts
    }
}

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("event {index}: invoke_ts {invoke} is not before return_ts {ret}")]
    InvalidInterval { index: usize, invoke: u64, ret: u64 },
    #[error("event {index}: enqueue without a value")]
    EnqueueWithoutValue { index: usize },
    #[error("events {first} and {second} enqueue the same value {value:?}")]
    DuplicateEnqueue { first: usize, second: usize, value: Tag },
    #[error("dequeues {first} and {second} overlap; a single consumer cannot do that")]
    OverlappingDequeues { first: usize, second: usize },
    #[error("history has {len} operations, brute force accepts at most {max}")]
    TooLarge { len: usize, max: usize },
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A complete history of queue operations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct History {
    pub events: Vec<HistoryEvent>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    op: Op,
    thread: u32,
    producer: u32,
    seq: u64,
    empty: bool,
    invoke_ts: u64,
    return_ts: u64,
}

impl From<&HistoryEvent> for Record {
    fn from(e: &HistoryEvent) -> Self {
        let tag = e.value.unwrap_or(Tag::new(0, 0));
        Record {
            op: e.op,
            thread: e.thread,
            producer: tag.producer,
            seq: tag.seq,
            empty: e.value.is_none(),
            invoke_ts: e.invoke_ts,
            return_ts: e.return_ts,
        }
    }
}

impl From<Record> for HistoryEvent {
    fn from(r: Record) -> Self {
        HistoryEvent {
            op: r.op,
            thread: r.thread,
            value: (!r.empty).then(|| Tag::new(r.producer, r.seq)),
            invoke_ts: r.invoke_ts,
            return_ts: r.return_ts,
        }
    }
}

impl History {
    pub fn new(events: Vec<HistoryEvent>) -> Self {
        History { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Checks that the history is well formed: proper intervals, distinct
    /// enqueued values, and dequeues that never overlap.
    pub fn validate(&self) -> Result<(), HistoryError> {
        let mut seen: HashMap<Tag, usize> = HashMap::new();
        let mut deqs = Vec::new();
        for (i, e) in self.events.iter().enumerate() {
            if e.invoke_ts >= e.return_ts {
                return Err(HistoryError::InvalidInterval { index: i, invoke: e.invoke_ts, ret: e.return_ts });
            }
            match e.op {
                Op::Enqueue => {
                    let v = e.value.ok_or(HistoryError::EnqueueWithoutValue { index: i })?;
                    if let Some(&first) = seen.get(&v) {
                        return Err(HistoryError::DuplicateEnqueue { first, second: i, value: v });
                    }
                    seen.insert(v, i);
                }
                Op::Dequeue => deqs.push(i),
            }
        }
        deqs.sort_by_key(|&i| self.events[i].invoke_ts);
        for w in deqs.windows(2) {
            let (a, b) = (&self.events[w[0]], &self.events[w[1]]);
            if !a.precedes(b) {
                return Err(HistoryError::OverlappingDequeues { first: w[0], second: w[1] });
            }
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), HistoryError> {
        for e in &self.events {
            serde_json::to_writer(&mut w, &Record::from(e)).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = Vec::new();
        self.write_jsonl(&mut out).expect("writing to memory cannot fail");
        String::from_utf8(out).expect("json is utf-8")
    }

    /// Reads one event per non-blank line.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<History, HistoryError> {
        let mut events = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record =
                serde_json::from_str(&line).map_err(|source| HistoryError::Parse { line: n + 1, source })?;
            events.push(rec.into());
        }
        Ok(History { events })
    }

    pub fn from_jsonl(s: &str) -> Result<History, HistoryError> {
        Self::read_jsonl(s.as_bytes())
    }
}

/// Clock shared by recording threads. Each reading is unique, strictly
/// greater than every earlier reading, and never behind wall time.
#[derive(Debug)]
pub struct Clock {
    origin: Instant,
    last: AtomicU64,
}

impl Default for Clock {
    fn default() -> Self {
        Clock { origin: Instant::now(), last: AtomicU64::new(0) }
    }
}

impl Clock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> u64 {
        let t = self.origin.elapsed().as_nanos() as u64;
        let prev = self
            .last
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |l| Some((l + 1).max(t)))
            .expect("closure always returns Some");
        (prev + 1).max(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(p: u32, s: u64) -> Option<Tag> {
        Some(Tag::new(p, s))
    }

    #[test]
    fn jsonl_round_trip() {
        let h = History::new(vec![
            HistoryEvent::enqueue(1, Tag::new(1, 0), 1, 4),
            HistoryEvent::dequeue(0, t(1, 0), 5, 6),
            HistoryEvent::dequeue(0, None, 7, 9),
        ]);
        let text = h.to_jsonl();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with(r#"{"op":"enq","thread":1,"producer":1,"seq":0,"empty":false,"invoke_ts":1,"return_ts":4}"#));
        assert_eq!(History::from_jsonl(&text).unwrap(), h);
    }

    #[test]
    fn parse_error_names_line() {
        let err = History::from_jsonl("\n{\"op\":\"deq\"}\n").unwrap_err();
        assert!(matches!(err, HistoryError::Parse { line: 2, .. }));
    }

    #[test]
    fn validate_rejects_duplicates_and_overlaps() {
        let dup = History::new(vec![
            HistoryEvent::enqueue(1, Tag::new(1, 0), 1, 2),
            HistoryEvent::enqueue(1, Tag::new(1, 0), 3, 4),
        ]);
        assert!(matches!(dup.validate(), Err(HistoryError::DuplicateEnqueue { first: 0, second: 1, .. })));
        let overlap = History::new(vec![HistoryEvent::dequeue(0, None, 1, 5), HistoryEvent::dequeue(0, None, 3, 6)]);
        assert!(matches!(overlap.validate(), Err(HistoryError::OverlappingDequeues { .. })));
        let bad = History::new(vec![HistoryEvent::dequeue(0, None, 3, 3)]);
        assert!(matches!(bad.validate(), Err(HistoryError::InvalidInterval { index: 0, .. })));
    }

    #[test]
    fn clock_is_strictly_increasing_across_threads() {
        let c = Clock::new();
        let mut all: Vec<u64> = std::thread::scope(|s| {
            let hs: Vec<_> = (0..4).map(|_| s.spawn(|| (0..1000).map(|_| c.now()).collect::<Vec<_>>())).collect();
            hs.into_iter().flat_map(|h| h.join().unwrap()).collect()
        });
        let n = all.len();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), n);
    }
}
