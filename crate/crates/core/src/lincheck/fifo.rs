//! Rule-based linearizability check for single-consumer FIFO histories.
//!
//! With one consumer the dequeues are totally ordered, so every dequeued
//! value gets a rank `k(v)`; values never dequeued get rank infinity. A
//! well-formed history is linearizable exactly when none of these holds:
//!
//! * R1: a dequeue returns a value that was never enqueued, or a value that
//!   an earlier dequeue already returned.
//! * R2: a dequeue of `v` returns before the enqueue of `v` is invoked.
//! * R3: `enq(v1)` precedes `enq(v2)` in real time, `v2` is dequeued and
//!   `k(v1) > k(v2)`.
//! * R4: an empty dequeue `d` is preceded by some `enq(v)` with
//!   `k(v) > rank(d)`, i.e. `v` was in the queue for all of `d`.

use std::collections::HashMap;

use super::history::{History, HistoryError, Op, Tag};
use super::{Rule, Verdict, Violation};

const NEVER: u64 = u64::MAX;

/// Prefix maxima of `k` over enqueues sorted by return time.
struct Prefix {
    returns: Vec<u64>,
    best: Vec<(u64, usize)>,
}

impl Prefix {
    fn new(mut items: Vec<(u64, u64, usize)>) -> Self {
        items.sort_unstable();
        let mut best = Vec::with_capacity(items.len());
        let mut cur = (0u64, usize::MAX);
        for &(_, k, i) in &items {
            if cur.1 == usize::MAX || k > cur.0 {
                cur = (k, i);
            }
            best.push(cur);
        }
        Prefix { returns: items.iter().map(|x| x.0).collect(), best }
    }

    /// Largest `k` among enqueues that returned strictly before `t`.
    fn max_before(&self, t: u64) -> Option<(u64, usize)> {
        let n = self.returns.partition_point(|&r| r < t);
        (n > 0).then(|| self.best[n - 1])
    }
}

/// Decides whether `history` is a linearizable single-consumer FIFO queue
/// history. Runs in `O(n log n)`.
pub fn check_mpsc_fifo(history: &History) -> Result<Verdict, HistoryError> {
    history.validate()?;
    let ev = &history.events;

    let mut enq_of: HashMap<Tag, usize> = HashMap::new();
    let mut deqs: Vec<usize> = Vec::new();
    for (i, e) in ev.iter().enumerate() {
        match e.op {
            Op::Enqueue => {
                enq_of.insert(e.value.expect("validated"), i);
            }
            Op::Dequeue => deqs.push(i),
        }
    }
    deqs.sort_by_key(|&i| ev[i].invoke_ts);

    // R1 and R2, assigning ranks on the way.
    let mut rank_of: HashMap<Tag, (u64, usize)> = HashMap::new();
    for (rank, &d) in deqs.iter().enumerate() {
        let Some(v) = ev[d].value else { continue };
        let Some(&e) = enq_of.get(&v) else {
            return Ok(violation(Rule::R1, vec![d], format!("dequeued {v:?}, which was never enqueued")));
        };
        if let Some(&(_, first)) = rank_of.get(&v) {
            return Ok(violation(Rule::R1, vec![e, first, d], format!("{v:?} dequeued twice")));
        }
        if ev[d].precedes(&ev[e]) {
            return Ok(violation(Rule::R2, vec![d, e], format!("{v:?} dequeued before its enqueue began")));
        }
        rank_of.insert(v, (rank as u64, d));
    }

    let k = |v: Tag| rank_of.get(&v).map_or(NEVER, |r| r.0);
    let prefix = Prefix::new(enq_of.iter().map(|(&v, &i)| (ev[i].return_ts, k(v), i)).collect());

    // R3: for each dequeued v2, the worst enqueue that precedes enq(v2).
    let mut r3: Vec<(&Tag, &usize)> = enq_of.iter().collect();
    r3.sort_by_key(|(_, &i)| i);
    for (&v2, &e2) in r3 {
        let k2 = k(v2);
        if k2 == NEVER {
            continue;
        }
        if let Some((k1, e1)) = prefix.max_before(ev[e2].invoke_ts) {
            if k1 > k2 {
                let v1 = ev[e1].value.expect("enqueue has value");
                let mut witness = vec![e1, e2, rank_of[&v2].1];
                let detail = if k1 == NEVER {
                    format!("{v1:?} enqueued before {v2:?} but never dequeued, while {v2:?} was")
                } else {
                    witness.push(rank_of[&v1].1);
                    format!("{v1:?} enqueued before {v2:?} but dequeued after it")
                };
                return Ok(violation(Rule::R3, witness, detail));
            }
        }
    }

    // R4: an empty dequeue while some value was certainly present.
    for (rank, &d) in deqs.iter().enumerate() {
        if ev[d].value.is_some() {
            continue;
        }
        if let Some((kv, e)) = prefix.max_before(ev[d].invoke_ts) {
            if kv > rank as u64 {
                let v = ev[e].value.expect("enqueue has value");
                return Ok(violation(
                    Rule::R4,
                    vec![e, d],
                    format!("dequeue returned empty while {v:?} was in the queue"),
                ));
            }
        }
    }

    Ok(Verdict::Linearizable)
}

fn violation(rule: Rule, witness: Vec<usize>, detail: String) -> Verdict {
    Verdict::Violation(Violation { rule, witness, detail })
}
