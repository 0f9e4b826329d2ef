//! Validation of recorded slot transitions.

use std::collections::HashMap;

use super::{Rule, Verdict, Violation};
use crate::queue::SlotState;
use crate::trace::{Role, SlotEvent};

/// Checks that every slot went `Empty -> Set` exactly once by a producer and
/// at most once `Set -> Handled` by the consumer, and nothing else.
pub fn check_slot_state_trace(trace: &[SlotEvent]) -> Verdict {
    #[derive(Default)]
    struct Seen {
        set: Option<usize>,
        handled: Option<usize>,
    }
    let mut slots: HashMap<u64, Seen> = HashMap::new();
    for (i, ev) in trace.iter().enumerate() {
        let s = slots.entry(ev.index).or_default();
        let fail = |detail: String, mut witness: Vec<usize>| {
            witness.push(i);
            Verdict::Violation(Violation { rule: Rule::IllegalTransition, witness, detail })
        };
        match (ev.from, ev.to, ev.role) {
            (SlotState::Empty, SlotState::Set, Role::Producer) => {
                if let Some(prev) = s.set {
                    return fail(format!("slot {} set twice", ev.index), vec![prev]);
                }
                s.set = Some(i);
            }
            (SlotState::Set, SlotState::Handled, Role::Consumer) => {
                if let Some(prev) = s.handled {
                    return fail(format!("slot {} handled twice", ev.index), vec![prev]);
                }
                s.handled = Some(i);
            }
            (from, to, role) => {
                return fail(format!("slot {}: {from:?} -> {to:?} by {role:?}", ev.index), vec![]);
            }
        }
    }
    let mut orphans: Vec<(u64, usize)> =
        slots.iter().filter(|(_, s)| s.set.is_none()).map(|(&k, s)| (k, s.handled.unwrap_or(0))).collect();
    orphans.sort_unstable();
    if let Some(&(index, at)) = orphans.first() {
        return Verdict::Violation(Violation {
            rule: Rule::IllegalTransition,
            witness: vec![at],
            detail: format!("slot {index} handled but never set"),
        });
    }
    Verdict::Linearizable
}
