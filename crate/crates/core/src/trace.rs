//! Optional recording of slot state transitions.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::queue::SlotState;
use crate::reclaim::grace::{stripe, STRIPES};

/// Which side of the queue performed a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Producer,
    Consumer,
}

/// One observed slot transition, keyed by global slot index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotEvent {
    pub index: u64,
    pub from: SlotState,
    pub to: SlotState,
    pub role: Role,
}

pub(crate) struct ProducerTrace {
    stripes: Box<[Mutex<Vec<SlotEvent>>]>,
}

impl ProducerTrace {
    pub(crate) fn new() -> Self {
        ProducerTrace { stripes: (0..STRIPES).map(|_| Mutex::new(Vec::new())).collect() }
    }

    pub(crate) fn record(&self, event: SlotEvent) {
        self.stripes[stripe()].lock().unwrap_or_else(|e| e.into_inner()).push(event);
    }

    pub(crate) fn drain_into(&self, out: &mut Vec<SlotEvent>) {
        for s in self.stripes.iter() {
            out.append(&mut s.lock().unwrap_or_else(|e| e.into_inner()));
        }
    }
}
