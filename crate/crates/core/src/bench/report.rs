use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{Mode, OutputFormat, QueueKind};

/// Column order of the CSV output.
pub const CSV_HEADER: &str = "run,mode,queue,producers,buffer_capacity,duration_secs,total_ops,throughput_mops,\
enqueue_ops,dequeue_ops,dequeued_items,empty_dequeues,remaining_items,buffers_allocated,buffers_freed,\
folds_performed,cas_attempts,cas_failures,dequeue_rmw_count,peak_live_buffers,seed,per_thread_ops";

/// One measured run, or the mean of several (`run == "mean"`).
///
/// Queue metrics are zero for the baselines, which do not track them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub run: String,
    pub mode: Mode,
    pub queue: QueueKind,
    pub producers: usize,
    pub buffer_capacity: usize,
    pub duration_secs: f64,
    pub total_ops: u64,
    /// Millions of operations per second, three decimals.
    pub throughput_mops: f64,
    pub enqueue_ops: u64,
    /// Dequeue calls, including those that found the queue empty.
    pub dequeue_ops: u64,
    pub dequeued_items: u64,
    pub empty_dequeues: u64,
    /// Items drained after the clock stopped.
    pub remaining_items: u64,
    pub buffers_allocated: u64,
    pub buffers_freed: u64,
    pub folds_performed: u64,
    pub cas_attempts: u64,
    pub cas_failures: u64,
    pub dequeue_rmw_count: u64,
    pub peak_live_buffers: u64,
    pub seed: u64,
    /// Producers in spawn order, then the consumer in mpsc mode.
    pub per_thread_ops: Vec<u64>,
}

pub(crate) fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

impl BenchReport {
    fn counters(&self) -> [(&'static str, u64); 15] {
        [
            ("total_ops", self.total_ops),
            ("enqueue_ops", self.enqueue_ops),
            ("dequeue_ops", self.dequeue_ops),
            ("dequeued_items", self.dequeued_items),
            ("empty_dequeues", self.empty_dequeues),
            ("remaining_items", self.remaining_items),
            ("buffers_allocated", self.buffers_allocated),
            ("buffers_freed", self.buffers_freed),
            ("folds_performed", self.folds_performed),
            ("cas_attempts", self.cas_attempts),
            ("cas_failures", self.cas_failures),
            ("dequeue_rmw_count", self.dequeue_rmw_count),
            ("peak_live_buffers", self.peak_live_buffers),
            ("producers", self.producers as u64),
            ("seed", self.seed),
        ]
    }

    fn csv_row(&self) -> String {
        let per_thread: Vec<String> = self.per_thread_ops.iter().map(u64::to_string).collect();
        format!(
            "{},{},{},{},{},{:.3},{},{:.3},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.run,
            label(&self.mode),
            label(&self.queue),
            self.producers,
            self.buffer_capacity,
            self.duration_secs,
            self.total_ops,
            self.throughput_mops,
            self.enqueue_ops,
            self.dequeue_ops,
            self.dequeued_items,
            self.empty_dequeues,
            self.remaining_items,
            self.buffers_allocated,
            self.buffers_freed,
            self.folds_performed,
            self.cas_attempts,
            self.cas_failures,
            self.dequeue_rmw_count,
            self.peak_live_buffers,
            self.seed,
            per_thread.join(";"),
        )
    }

    fn write_human<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(
            w,
            "run {}: {} {}, {} producer(s), capacity {}",
            self.run,
            label(&self.queue),
            label(&self.mode),
            self.producers,
            self.buffer_capacity
        )?;
        writeln!(w, "  duration_secs = {:.3}", self.duration_secs)?;
        writeln!(w, "  throughput_mops = {:.3}", self.throughput_mops)?;
        for (k, v) in self.counters().iter().take(6) {
            writeln!(w, "  {k} = {v}")?;
        }
        let per_thread: Vec<String> = self.per_thread_ops.iter().map(u64::to_string).collect();
        writeln!(w, "  per_thread_ops = {}", per_thread.join(" "))?;
        if self.queue == QueueKind::Jiffy {
            for (k, v) in self.counters().iter().skip(6).take(7) {
                writeln!(w, "  {k} = {v}")?;
            }
        }
        writeln!(w, "  seed = {}", self.seed)
    }
}

/// Writes one report in `format`. CSV output includes the header line.
pub fn emit_report<W: Write>(report: &BenchReport, format: OutputFormat, w: &mut W) -> io::Result<()> {
    emit_reports(std::slice::from_ref(report), format, w)
}

/// Writes every report, followed by their mean when there is more than one.
pub fn emit_reports<W: Write>(reports: &[BenchReport], format: OutputFormat, w: &mut W) -> io::Result<()> {
    let mean = if reports.len() > 1 { mean_report(reports) } else { None };
    let all = reports.iter().chain(mean.as_ref());
    match format {
        OutputFormat::Human => {
            for (i, r) in all.enumerate() {
                if i > 0 {
                    writeln!(w)?;
                }
                r.write_human(w)?;
            }
        }
        OutputFormat::Json => {
            for r in all {
                serde_json::to_writer(&mut *w, r)?;
                writeln!(w)?;
            }
        }
        OutputFormat::Csv => {
            writeln!(w, "{CSV_HEADER}")?;
            for r in all {
                writeln!(w, "{}", r.csv_row())?;
            }
        }
    }
    Ok(())
}

/// Parses one line of JSON output.
pub fn parse_json_report(line: &str) -> Result<BenchReport, serde_json::Error> {
    serde_json::from_str(line)
}

/// Field-wise arithmetic mean, with counters rounded to the nearest integer.
/// `None` for an empty slice.
pub fn mean_report(reports: &[BenchReport]) -> Option<BenchReport> {
    let first = reports.first()?;
    let n = reports.len() as f64;
    let avg = |f: fn(&BenchReport) -> u64| (reports.iter().map(|r| f(r) as f64).sum::<f64>() / n).round() as u64;
    let avg_f = |f: fn(&BenchReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let width = reports.iter().map(|r| r.per_thread_ops.len()).max().unwrap_or(0);
    let per_thread_ops = (0..width)
        .map(|i| {
            let s: f64 = reports.iter().map(|r| r.per_thread_ops.get(i).copied().unwrap_or(0) as f64).sum();
            (s / n).round() as u64
        })
        .collect();
    Some(BenchReport {
        run: "mean".into(),
        mode: first.mode,
        queue: first.queue,
        producers: first.producers,
        buffer_capacity: first.buffer_capacity,
        duration_secs: avg_f(|r| r.duration_secs),
        total_ops: avg(|r| r.total_ops),
        throughput_mops: round3(avg_f(|r| r.throughput_mops)),
        enqueue_ops: avg(|r| r.enqueue_ops),
        dequeue_ops: avg(|r| r.dequeue_ops),
        dequeued_items: avg(|r| r.dequeued_items),
        empty_dequeues: avg(|r| r.empty_dequeues),
        remaining_items: avg(|r| r.remaining_items),
        buffers_allocated: avg(|r| r.buffers_allocated),
        buffers_freed: avg(|r| r.buffers_freed),
        folds_performed: avg(|r| r.folds_performed),
        cas_attempts: avg(|r| r.cas_attempts),
        cas_failures: avg(|r| r.cas_failures),
        dequeue_rmw_count: avg(|r| r.dequeue_rmw_count),
        peak_live_buffers: avg(|r| r.peak_live_buffers),
        seed: first.seed,
        per_thread_ops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample(run: &str, mops: f64) -> BenchReport {
        BenchReport {
            run: run.into(),
            mode: Mode::Mpsc,
            queue: QueueKind::Jiffy,
            producers: 2,
            buffer_capacity: 1620,
            duration_secs: 1.0,
            total_ops: 3000,
            throughput_mops: mops,
            enqueue_ops: 2000,
            dequeue_ops: 1000,
            dequeued_items: 900,
            empty_dequeues: 100,
            remaining_items: 1100,
            buffers_allocated: 3,
            buffers_freed: 2,
            folds_performed: 0,
            cas_attempts: 2,
            cas_failures: 0,
            dequeue_rmw_count: 0,
            peak_live_buffers: 2,
            seed: 9,
            per_thread_ops: vec![1000, 1000, 1000],
        }
    }

    #[test]
    fn csv_has_header_and_row_count() {
        let mut out = Vec::new();
        emit_reports(&[sample("1", 1.0), sample("2", 2.0)], OutputFormat::Csv, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[3].starts_with("mean,mpsc,jiffy,2,1620,1.000,3000,1.500,"));
        assert!(lines[1].ends_with(",9,1000;1000;1000"));
        let cols = CSV_HEADER.split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == cols));
    }

    #[test]
    fn human_lists_rmw_counter_for_jiffy() {
        let mut out = Vec::new();
        emit_report(&sample("1", 1.0), OutputFormat::Human, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("  dequeue_rmw_count = 0\n"));
        assert!(text.contains("  throughput_mops = 1.000\n"));
    }

    #[test]
    fn mean_of_nothing_is_none() {
        assert!(mean_report(&[]).is_none());
    }
}
