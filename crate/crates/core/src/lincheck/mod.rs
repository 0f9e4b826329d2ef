//! Linearizability checking for single-consumer FIFO queues.
//!
//! * [`record_workload`] runs a workload against [`crate::JiffyQueue`] and
//!   records a [`History`].
//! * [`check_mpsc_fifo`] decides linearizability in `O(n log n)` using four
//!   local rules that are exact when dequeues are totally ordered.
//! * [`brute_force_linearizable`] searches all orderings; use it as an
//!   oracle for histories of up to [`BRUTE_FORCE_MAX_OPS`] operations.
//! * [`check_slot_state_trace`] validates recorded slot transitions.

mod brute;
mod fifo;
mod history;
mod record;
mod slots;

use std::fmt;

pub use brute::{brute_force_linearizable, BRUTE_FORCE_MAX_OPS};
pub use fifo::check_mpsc_fifo;
pub use history::{Clock, History, HistoryError, HistoryEvent, Op, Tag};
pub use record::{record_rerun, record_workload, Recording, WorkloadConfig, WorkloadError, CONSUMER_THREAD};
pub use slots::check_slot_state_trace;

/// Which condition a rejected history or trace broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    /// Unknown or repeated dequeued value.
    R1,
    /// Value dequeued before its enqueue started.
    R2,
    /// Values dequeued out of enqueue order.
    R3,
    /// Empty dequeue while a value was certainly present.
    R4,
    /// Exhaustive search found no valid ordering.
    NoLinearization,
    /// A slot changed state in a way the protocol forbids.
    IllegalTransition,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::R1 => "R1",
            Rule::R2 => "R2",
            Rule::R3 => "R3",
            Rule::R4 => "R4",
            Rule::NoLinearization => "no-linearization",
            Rule::IllegalTransition => "illegal-transition",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: Rule,
    /// Indices of the events (or trace entries) involved.
    pub witness: Vec<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Linearizable,
    Violation(Violation),
}

impl Verdict {
    pub fn is_linearizable(&self) -> bool {
        matches!(self, Verdict::Linearizable)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Linearizable => f.write_str("linearizable"),
            Verdict::Violation(v) => write!(f, "violation of {}: {} (events {:?})", v.rule, v.detail, v.witness),
        }
    }
}
