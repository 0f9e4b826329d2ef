//! Running workloads against the queue and recording their histories.
//!
//! Two schedulers are available. With a seed, every thread is simulated on
//! the calling thread: a seeded generator picks which producer or the
//! consumer takes the next step, and may complete outstanding reservations
//! in the middle of a dequeue's walk. Timestamps are logical ticks, so a
//! seeded run replays byte for byte. Without a seed, producers run on real
//! threads and timestamps come from a shared [`Clock`].

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::history::{Clock, History, HistoryEvent, Tag};
use crate::metrics::MetricsSnapshot;
use crate::queue::{Config, ConfigError, JiffyQueue, Producer, Reservation};
use crate::trace::SlotEvent;

/// Thread id used for the consumer in recorded histories. Producer `p`
/// records as thread `p + 1`.
pub const CONSUMER_THREAD: u32 = 0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkloadConfig {
    pub producers: usize,
    pub ops_per_producer: usize,
    /// Dequeues attempted while producers are still running. The consumer
    /// then drains until it sees the queue empty.
    pub consumer_ops: usize,
    pub capacity: usize,
    /// `Some` selects the deterministic single-thread scheduler.
    pub seed: Option<u64>,
    /// The first `suspended` producers claim their first slot at the start
    /// and only fill it after everyone else has finished.
    pub suspended: usize,
    pub pool_limit: Option<usize>,
    pub trace_slots: bool,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            producers: 2,
            ops_per_producer: 100,
            consumer_ops: 100,
            capacity: crate::DEFAULT_CAPACITY,
            seed: None,
            suspended: 0,
            pool_limit: None,
            trace_slots: false,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WorkloadError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("at least one producer is required")]
    NoProducers,
    #[error("{suspended} suspended producers requested but only {producers} producers")]
    TooManySuspended { suspended: usize, producers: usize },
}

/// Outcome of [`record_workload`].
#[derive(Debug, Clone)]
pub struct Recording {
    pub history: History,
    /// Values in the order the consumer received them.
    pub dequeued: Vec<Tag>,
    pub metrics: MetricsSnapshot,
    /// Live slot arrays after the final drain.
    pub live_buffers_after_drain: u64,
    pub slot_trace: Vec<SlotEvent>,
}

impl WorkloadConfig {
    fn queue_config(&self) -> Config {
        let mut c = Config::new().capacity(self.capacity).trace_slots(self.trace_slots);
        if let Some(l) = self.pool_limit {
            c = c.pool(l);
        }
        c
    }

    fn check(&self) -> Result<(), WorkloadError> {
        self.queue_config().validate()?;
        if self.producers == 0 {
            return Err(WorkloadError::NoProducers);
        }
        if self.suspended > self.producers {
            return Err(WorkloadError::TooManySuspended { suspended: self.suspended, producers: self.producers });
        }
        Ok(())
    }
}

/// Runs the workload described by `cfg` and returns its history.
pub fn record_workload(cfg: &WorkloadConfig) -> Result<Recording, WorkloadError> {
    cfg.check()?;
    let q = JiffyQueue::with_config(cfg.queue_config())?;
    Ok(match cfg.seed {
        Some(seed) => Simulation::new(cfg, seed, q).run(),
        None => run_threads(cfg, q),
    })
}

/// Runs `cfg` twice on the deterministic scheduler with the same queue,
/// returning both recordings. The first run warms up the pool.
pub fn record_rerun(cfg: &WorkloadConfig) -> Result<(Recording, Recording), WorkloadError> {
    cfg.check()?;
    let seed = cfg.seed.unwrap_or(0);
    let q = JiffyQueue::with_config(cfg.queue_config())?;
    let mut sim = Simulation::new(cfg, seed, q);
    let first = sim.run_once();
    let mut sim = Simulation::new(cfg, seed, sim.queue);
    let second = sim.run_once();
    Ok((first, second))
}

struct Pending {
    reservation: Reservation<Tag>,
    tag: Tag,
    invoke: u64,
}

struct SimProducer {
    handle: Producer<Tag>,
    id: u32,
    next_seq: u64,
    remaining: usize,
    pending: Option<Pending>,
    suspended: bool,
}

/// Producer-side state of the simulation, kept apart from the queue so a
/// dequeue observer can drive it.
struct World {
    tick: u64,
    rng: ChaCha8Rng,
    events: Vec<HistoryEvent>,
    producers: Vec<SimProducer>,
}

impl World {
    fn tick(&mut self) -> u64 {
        self.tick += 1;
        self.tick
    }

    fn reserve(&mut self, p: usize) {
        let invoke = self.tick();
        let sp = &mut self.producers[p];
        let tag = Tag::new(sp.id, sp.next_seq);
        sp.next_seq += 1;
        sp.remaining -= 1;
        sp.pending = Some(Pending { reservation: sp.handle.reserve(), tag, invoke });
    }

    fn complete(&mut self, p: usize) {
        let pending = self.producers[p].pending.take().expect("pending reservation");
        pending.reservation.complete(pending.tag);
        let ret = self.tick();
        self.events.push(HistoryEvent::enqueue(self.producers[p].id + 1, pending.tag, pending.invoke, ret));
    }

    /// Producers with an outstanding, non-suspended reservation.
    fn completable(&self) -> Vec<usize> {
        (0..self.producers.len())
            .filter(|&i| self.producers[i].pending.is_some() && !self.producers[i].suspended)
            .collect()
    }
}

struct Simulation {
    world: World,
    queue: JiffyQueue<Tag>,
    consumer_ops: usize,
    dequeued: Vec<Tag>,
}

impl Simulation {
    fn new(cfg: &WorkloadConfig, seed: u64, queue: JiffyQueue<Tag>) -> Self {
        let producers = (0..cfg.producers)
            .map(|i| SimProducer {
                handle: queue.producer(),
                id: i as u32,
                next_seq: 0,
                remaining: cfg.ops_per_producer,
                pending: None,
                suspended: i < cfg.suspended,
            })
            .collect();
        Simulation {
            world: World { tick: 0, rng: ChaCha8Rng::seed_from_u64(seed), events: Vec::new(), producers },
            queue,
            consumer_ops: cfg.consumer_ops,
            dequeued: Vec::new(),
        }
    }

    fn run(mut self) -> Recording {
        self.run_once()
    }

    fn dequeue(&mut self) -> Option<Tag> {
        let invoke = self.world.tick();
        let world = &mut self.world;
        let got = self.queue.dequeue_observed(&mut |_step| {
            let ready = world.completable();
            if !ready.is_empty() && world.rng.gen_ratio(1, 3) {
                let p = ready[world.rng.gen_range(0..ready.len())];
                world.complete(p);
            }
        });
        let ret = self.world.tick();
        self.world.events.push(HistoryEvent::dequeue(CONSUMER_THREAD, got, invoke, ret));
        if let Some(v) = got {
            self.dequeued.push(v);
        }
        got
    }

    fn run_once(&mut self) -> Recording {
        for p in 0..self.world.producers.len() {
            if self.world.producers[p].suspended && self.world.producers[p].remaining > 0 {
                self.world.reserve(p);
            }
        }
        let mut consumer_left = self.consumer_ops;
        loop {
            let mut choices: Vec<Option<usize>> = Vec::new();
            for (i, p) in self.world.producers.iter().enumerate() {
                if p.suspended {
                    continue;
                }
                if p.pending.is_some() || p.remaining > 0 {
                    choices.push(Some(i));
                }
            }
            if consumer_left > 0 {
                choices.push(None);
            }
            if choices.is_empty() {
                break;
            }
            match choices[self.world.rng.gen_range(0..choices.len())] {
                Some(p) if self.world.producers[p].pending.is_some() => self.world.complete(p),
                Some(p) => self.world.reserve(p),
                None => {
                    consumer_left -= 1;
                    self.dequeue();
                }
            }
        }
        for p in 0..self.world.producers.len() {
            if !self.world.producers[p].suspended {
                continue;
            }
            self.world.producers[p].suspended = false;
            if self.world.producers[p].pending.is_some() {
                self.world.complete(p);
            }
            while self.world.producers[p].remaining > 0 {
                self.world.reserve(p);
                self.world.complete(p);
            }
        }
        while self.dequeue().is_some() {}
        Recording {
            history: History::new(std::mem::take(&mut self.world.events)),
            dequeued: std::mem::take(&mut self.dequeued),
            metrics: self.queue.metrics(),
            live_buffers_after_drain: self.queue.live_buffers(),
            slot_trace: self.queue.take_slot_trace(),
        }
    }
}

fn run_threads(cfg: &WorkloadConfig, mut q: JiffyQueue<Tag>) -> Recording {
    let clock = Clock::new();
    let running = AtomicUsize::new(cfg.producers - cfg.suspended);
    let release = AtomicBool::new(false);
    let mut events = Vec::new();
    let mut dequeued = Vec::new();

    thread::scope(|s| {
        let handles: Vec<_> = (0..cfg.producers)
            .map(|i| {
                let p = q.producer();
                let (clock, running, release) = (&clock, &running, &release);
                let suspended = i < cfg.suspended;
                let ops = cfg.ops_per_producer;
                s.spawn(move || {
                    let id = i as u32;
                    let mut log = Vec::with_capacity(ops);
                    let mut seq = 0u64;
                    if suspended && ops > 0 {
                        let invoke = clock.now();
                        let r = p.reserve();
                        while !release.load(Ordering::Acquire) {
                            thread::yield_now();
                        }
                        r.complete(Tag::new(id, 0));
                        log.push(HistoryEvent::enqueue(id + 1, Tag::new(id, 0), invoke, clock.now()));
                        seq = 1;
                    }
                    for s in seq..ops as u64 {
                        let tag = Tag::new(id, s);
                        let invoke = clock.now();
                        p.enqueue(tag);
                        log.push(HistoryEvent::enqueue(id + 1, tag, invoke, clock.now()));
                    }
                    if !suspended {
                        running.fetch_sub(1, Ordering::AcqRel);
                    }
                    log
                })
            })
            .collect();

        let mut attempts = 0;
        while attempts < cfg.consumer_ops && running.load(Ordering::Acquire) > 0 {
            attempts += 1;
            let invoke = clock.now();
            let got = q.dequeue();
            events.push(HistoryEvent::dequeue(CONSUMER_THREAD, got, invoke, clock.now()));
            match got {
                Some(v) => dequeued.push(v),
                None => thread::yield_now(),
            }
        }
        while running.load(Ordering::Acquire) > 0 {
            thread::yield_now();
        }
        release.store(true, Ordering::Release);
        for h in handles {
            events.extend(h.join().expect("producer panicked"));
        }
    });

    loop {
        let invoke = clock.now();
        let got = q.dequeue();
        events.push(HistoryEvent::dequeue(CONSUMER_THREAD, got, invoke, clock.now()));
        match got {
            Some(v) => dequeued.push(v),
            None => break,
        }
    }
    events.sort_by_key(|e| e.invoke_ts);
    Recording {
        history: History::new(events),
        dequeued,
        metrics: q.metrics(),
        live_buffers_after_drain: q.live_buffers(),
        slot_trace: q.take_slot_trace(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lincheck::check_mpsc_fifo;

    fn seeded(seed: u64) -> WorkloadConfig {
        WorkloadConfig {
            producers: 3,
            ops_per_producer: 20,
            consumer_ops: 30,
            capacity: 2,
            seed: Some(seed),
            suspended: 1,
            ..Default::default()
        }
    }

    #[test]
    fn seeded_runs_replay_identically() {
        let a = record_workload(&seeded(7)).unwrap();
        let b = record_workload(&seeded(7)).unwrap();
        assert_eq!(a.history.to_jsonl(), b.history.to_jsonl());
        let c = record_workload(&seeded(8)).unwrap();
        assert_ne!(a.history.to_jsonl(), c.history.to_jsonl());
    }

    #[test]
    fn seeded_run_delivers_everything_and_is_linearizable() {
        for seed in 0..50 {
            let r = record_workload(&seeded(seed)).unwrap();
            assert_eq!(r.dequeued.len(), 60);
            assert!(check_mpsc_fifo(&r.history).unwrap().is_linearizable(), "seed {seed}");
        }
    }

    #[test]
    fn threaded_run_is_linearizable() {
        let cfg = WorkloadConfig { producers: 3, ops_per_producer: 500, consumer_ops: 1000, capacity: 4, ..Default::default() };
        let r = record_workload(&cfg).unwrap();
        assert_eq!(r.dequeued.len(), 1500);
        assert!(check_mpsc_fifo(&r.history).unwrap().is_linearizable());
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = seeded(0);
        cfg.capacity = 1;
        assert!(matches!(record_workload(&cfg), Err(WorkloadError::Config(_))));
        cfg.capacity = 4;
        cfg.suspended = 9;
        assert!(matches!(record_workload(&cfg), Err(WorkloadError::TooManySuspended { .. })));
    }
}
