use std::fs::File;
use std::io::BufWriter;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_utils::CachePadded;

use super::report::round3;
use super::{BenchConfig, BenchError, BenchReport, Mode, MutexProducer, MutexQueue, QueueKind};
use crate::lincheck::{Clock, History, HistoryEvent, Tag, CONSUMER_THREAD};
use crate::metrics::MetricsSnapshot;
use crate::queue::{Config, JiffyQueue, Producer};

const SEQ_BITS: u32 = 40;

fn encode(producer: usize, seq: u64) -> u64 {
    ((producer as u64) << SEQ_BITS) | seq
}

fn decode(v: u64) -> Tag {
    Tag::new((v >> SEQ_BITS) as u32, v & ((1 << SEQ_BITS) - 1))
}

/// What the harness needs from a queue under test.
trait Target: Send + Sized {
    type P: Send;
    fn producer(&self) -> Self::P;
    fn push(p: &Self::P, v: u64);
    fn pop(&mut self) -> Option<u64>;
    fn metrics(&self) -> Option<MetricsSnapshot>;
}

impl Target for JiffyQueue<u64> {
    type P = Producer<u64>;
    fn producer(&self) -> Self::P {
        JiffyQueue::producer(self)
    }
    fn push(p: &Self::P, v: u64) {
        p.enqueue(v)
    }
    fn pop(&mut self) -> Option<u64> {
        self.dequeue()
    }
    fn metrics(&self) -> Option<MetricsSnapshot> {
        Some(JiffyQueue::metrics(self))
    }
}

impl Target for MutexQueue<u64> {
    type P = MutexProducer<u64>;
    fn producer(&self) -> Self::P {
        MutexQueue::producer(self)
    }
    fn push(p: &Self::P, v: u64) {
        p.enqueue(v)
    }
    fn pop(&mut self) -> Option<u64> {
        self.dequeue()
    }
    fn metrics(&self) -> Option<MetricsSnapshot> {
        None
    }
}

struct FaaCounter(Arc<CachePadded<AtomicU64>>);

impl Target for FaaCounter {
    type P = Arc<CachePadded<AtomicU64>>;
    fn producer(&self) -> Self::P {
        Arc::clone(&self.0)
    }
    fn push(p: &Self::P, _v: u64) {
        p.fetch_add(1, Ordering::SeqCst);
    }
    fn pop(&mut self) -> Option<u64> {
        self.0.fetch_add(1, Ordering::SeqCst);
        None
    }
    fn metrics(&self) -> Option<MetricsSnapshot> {
        None
    }
}

#[cfg(target_os = "linux")]
fn pin_current(index: usize) -> Result<(), BenchError> {
    let ncpu = thread::available_parallelism().map_or(1, |n| n.get());
    let cpu = index % ncpu;
    // SAFETY: cpu_set_t is plain data; the calls only touch the local set.
    let rc = unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(cpu, &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set)
    };
    if rc == 0 {
        Ok(())
    } else {
        Err(BenchError::Pin { cpu, source: std::io::Error::last_os_error() })
    }
}

#[cfg(not(target_os = "linux"))]
fn pin_current(_index: usize) -> Result<(), BenchError> {
    Err(BenchError::PinUnsupported)
}

struct Phase {
    elapsed: Duration,
    producer_ops: Vec<u64>,
    dequeues: u64,
    empty: u64,
    remaining: u64,
    metrics: Option<MetricsSnapshot>,
    history: Option<History>,
}

fn wait_for(flag: &AtomicBool) {
    while !flag.load(Ordering::Acquire) {
        thread::yield_now();
    }
}

fn run_phase<Q: Target>(cfg: &BenchConfig, mut q: Q, duration: Duration, record: bool) -> Result<Phase, BenchError> {
    let consumer = cfg.mode == Mode::Mpsc;
    let threads = cfg.producers + usize::from(consumer);
    let start = AtomicBool::new(false);
    let stop = AtomicBool::new(false);
    let ready = AtomicUsize::new(0);
    let clock = Clock::new();
    let (start, stop, ready, clock) = (&start, &stop, &ready, &clock);

    let (elapsed, producers, consumed) = thread::scope(|s| {
        let mut handles = Vec::with_capacity(cfg.producers);
        for i in 0..cfg.producers {
            let p = q.producer();
            let pin = cfg.pin;
            handles.push(s.spawn(move || -> Result<(u64, Vec<HistoryEvent>), BenchError> {
                if pin {
                    pin_current(i)?;
                }
                ready.fetch_add(1, Ordering::AcqRel);
                wait_for(start);
                let mut n = 0u64;
                let mut log = Vec::new();
                while !stop.load(Ordering::Relaxed) {
                    let v = encode(i, n);
                    if record {
                        let invoke = clock.now();
                        Q::push(&p, v);
                        log.push(HistoryEvent::enqueue(i as u32 + 1, decode(v), invoke, clock.now()));
                    } else {
                        Q::push(&p, v);
                    }
                    n += 1;
                }
                Ok((n, log))
            }));
        }
        let consumer_handle = consumer.then(|| {
            let pin = cfg.pin;
            let index = cfg.producers;
            let q = &mut q;
            s.spawn(move || -> Result<(u64, u64, Vec<HistoryEvent>), BenchError> {
                if pin {
                    pin_current(index)?;
                }
                ready.fetch_add(1, Ordering::AcqRel);
                wait_for(start);
                let (mut got, mut empty) = (0u64, 0u64);
                let mut log = Vec::new();
                while !stop.load(Ordering::Relaxed) {
                    let invoke = if record { clock.now() } else { 0 };
                    let v = q.pop();
                    if record {
                        log.push(HistoryEvent::dequeue(CONSUMER_THREAD, v.map(decode), invoke, clock.now()));
                    }
                    match v {
                        Some(_) => got += 1,
                        None => empty += 1,
                    }
                }
                Ok((got, empty, log))
            })
        });

        while ready.load(Ordering::Acquire) < threads {
            thread::yield_now();
        }
        let t0 = Instant::now();
        start.store(true, Ordering::Release);
        thread::sleep(duration);
        stop.store(true, Ordering::Release);
        let elapsed = t0.elapsed();
        let producers: Vec<_> = handles.into_iter().map(|h| h.join().expect("producer panicked")).collect();
        let consumed = consumer_handle.map(|h| h.join().expect("consumer panicked"));
        (elapsed, producers, consumed)
    });

    let mut events = Vec::new();
    let mut producer_ops = Vec::with_capacity(cfg.producers);
    for r in producers {
        let (n, log) = r?;
        producer_ops.push(n);
        events.extend(log);
    }
    let (dequeues, empty) = match consumed {
        Some(r) => {
            let (got, empty, log) = r?;
            events.extend(log);
            (got, empty)
        }
        None => (0, 0),
    };

    let mut remaining = 0u64;
    loop {
        let invoke = if record { clock.now() } else { 0 };
        let v = q.pop();
        if record {
            events.push(HistoryEvent::dequeue(CONSUMER_THREAD, v.map(decode), invoke, clock.now()));
        }
        match v {
            Some(_) => remaining += 1,
            None => break,
        }
    }

    let history = record.then(|| {
        events.sort_by_key(|e| e.invoke_ts);
        History::new(events)
    });
    Ok(Phase { elapsed, producer_ops, dequeues, empty, remaining, metrics: q.metrics(), history })
}

fn run_kind(cfg: &BenchConfig, duration: Duration, record: bool) -> Result<Phase, BenchError> {
    match cfg.queue {
        QueueKind::Jiffy => {
            let mut qc = Config::new().capacity(cfg.buffer_capacity);
            qc.pool_limit = cfg.pool_limit;
            run_phase(cfg, JiffyQueue::<u64>::with_config(qc)?, duration, record)
        }
        QueueKind::Mutex => run_phase(cfg, MutexQueue::<u64>::new(), duration, record),
        QueueKind::FaaUpperBound => {
            run_phase(cfg, FaaCounter(Arc::new(CachePadded::new(AtomicU64::new(0)))), duration, false)
        }
    }
}

/// Runs one warm-up (if configured) and one measured phase.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    cfg.validate()?;
    if !cfg.warmup.is_zero() {
        run_kind(cfg, cfg.warmup, false)?;
    }
    let record = cfg.record_history.is_some();
    let phase = run_kind(cfg, cfg.duration, record)?;
    if let (Some(path), Some(h)) = (&cfg.record_history, &phase.history) {
        h.write_jsonl(BufWriter::new(File::create(path)?))?;
    }
    Ok(report(cfg, &phase))
}

/// Runs `cfg.repeat` measured phases (each with its own warm-up).
pub fn run_repeated(cfg: &BenchConfig) -> Result<Vec<BenchReport>, BenchError> {
    cfg.validate()?;
    (1..=cfg.repeat)
        .map(|i| {
            let mut r = run_bench(cfg)?;
            r.run = i.to_string();
            Ok(r)
        })
        .collect()
}

fn report(cfg: &BenchConfig, p: &Phase) -> BenchReport {
    let enqueue_ops: u64 = p.producer_ops.iter().sum();
    let dequeue_ops = p.dequeues + p.empty;
    let total_ops = enqueue_ops + dequeue_ops;
    let secs = p.elapsed.as_secs_f64();
    let mut per_thread_ops = p.producer_ops.clone();
    if cfg.mode == Mode::Mpsc {
        per_thread_ops.push(dequeue_ops);
    }
    let m = p.metrics.unwrap_or_default();
    BenchReport {
        run: "1".into(),
        mode: cfg.mode,
        queue: cfg.queue,
        producers: cfg.producers,
        buffer_capacity: cfg.buffer_capacity,
        duration_secs: secs,
        total_ops,
        throughput_mops: round3(total_ops as f64 / secs / 1e6),
        enqueue_ops,
        dequeue_ops,
        dequeued_items: p.dequeues,
        empty_dequeues: p.empty,
        remaining_items: p.remaining,
        buffers_allocated: m.buffers_allocated,
        buffers_freed: m.buffers_freed,
        folds_performed: m.folds_performed,
        cas_attempts: m.cas_attempts,
        cas_failures: m.cas_failures,
        dequeue_rmw_count: m.dequeue_rmw_count,
        peak_live_buffers: m.peak_live_buffers,
        seed: cfg.seed,
        per_thread_ops,
    }
}
