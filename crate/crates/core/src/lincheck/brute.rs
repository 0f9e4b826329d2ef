//! Exhaustive linearizability search against a sequential FIFO queue.
//!
//! Tries every order of operations that respects real-time precedence,
//! pruning on the sequential queue's responses. Exponential; meant as an
//! oracle for small histories.

use std::collections::{HashSet, VecDeque};

use super::history::{History, HistoryError, Op, Tag};
use super::{Rule, Verdict, Violation};

/// Largest history [`brute_force_linearizable`] accepts.
pub const BRUTE_FORCE_MAX_OPS: usize = 12;

pub fn brute_force_linearizable(history: &History) -> Result<Verdict, HistoryError> {
    let n = history.len();
    if n > BRUTE_FORCE_MAX_OPS {
        return Err(HistoryError::TooLarge { len: n, max: BRUTE_FORCE_MAX_OPS });
    }
    history.validate()?;
    let ev = &history.events;
    // preds[i]: operations that must be linearized before i.
    let preds: Vec<u32> = (0..n)
        .map(|i| (0..n).filter(|&j| ev[j].precedes(&ev[i])).fold(0u32, |m, j| m | (1 << j)))
        .collect();

    let mut seen: HashSet<(u32, Vec<Tag>)> = HashSet::new();
    let mut queue = VecDeque::new();
    if search(ev, &preds, 0, &mut queue, &mut seen) {
        Ok(Verdict::Linearizable)
    } else {
        Ok(Verdict::Violation(Violation {
            rule: Rule::NoLinearization,
            witness: (0..n).collect(),
            detail: "no ordering consistent with real time and FIFO semantics".into(),
        }))
    }
}

fn search(
    ev: &[super::HistoryEvent],
    preds: &[u32],
    done: u32,
    queue: &mut VecDeque<Tag>,
    seen: &mut HashSet<(u32, Vec<Tag>)>,
) -> bool {
    let n = ev.len();
    if done.count_ones() as usize == n {
        return true;
    }
    if !seen.insert((done, queue.iter().copied().collect())) {
        return false;
    }
    for i in 0..n {
        let bit = 1u32 << i;
        if done & bit != 0 || preds[i] & !done != 0 {
            continue;
        }
        let e = &ev[i];
        match (e.op, e.value) {
            (Op::Enqueue, Some(v)) => {
                queue.push_back(v);
                if search(ev, preds, done | bit, queue, seen) {
                    return true;
                }
                queue.pop_back();
            }
            (Op::Dequeue, Some(v)) => {
                if queue.front() == Some(&v) {
                    queue.pop_front();
                    if search(ev, preds, done | bit, queue, seen) {
                        return true;
                    }
                    queue.push_front(v);
                }
            }
            (Op::Dequeue, None) => {
                if queue.is_empty() && search(ev, preds, done | bit, queue, seen) {
                    return true;
                }
            }
            (Op::Enqueue, None) => unreachable!("validated"),
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lincheck::HistoryEvent;

    #[test]
    fn accepts_simple_fifo() {
        let h = History::new(vec![
            HistoryEvent::enqueue(1, Tag::new(0, 0), 1, 2),
            HistoryEvent::dequeue(0, Some(Tag::new(0, 0)), 3, 4),
        ]);
        assert!(brute_force_linearizable(&h).unwrap().is_linearizable());
    }

    #[test]
    fn rejects_lifo() {
        let h = History::new(vec![
            HistoryEvent::enqueue(1, Tag::new(0, 0), 1, 2),
            HistoryEvent::enqueue(1, Tag::new(0, 1), 3, 4),
            HistoryEvent::dequeue(0, Some(Tag::new(0, 1)), 5, 6),
        ]);
        assert!(!brute_force_linearizable(&h).unwrap().is_linearizable());
    }

    #[test]
    fn rejects_oversized_input() {
        let events = (0..13).map(|i| HistoryEvent::enqueue(1, Tag::new(0, i), 2 * i + 1, 2 * i + 2)).collect();
        assert!(matches!(
            brute_force_linearizable(&History::new(events)),
            Err(HistoryError::TooLarge { len: 13, max: 12 })
        ));
    }
}
