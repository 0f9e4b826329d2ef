//! Checks a history file (one JSON event per line). Small histories are also
//! confirmed by exhaustive search.
//!
//! cargo run --example check_history -- history.jsonl

use std::fs::File;
use std::io::BufReader;
use std::process::ExitCode;

use jiffy::lincheck::{brute_force_linearizable, check_mpsc_fifo, History, BRUTE_FORCE_MAX_OPS};

fn main() -> ExitCode {
    let Some(path) = std::env::args().nth(1) else {
        eprintln!("usage: check_history <history.jsonl>");
        return ExitCode::from(2);
    };
    let history = match File::open(&path).map_err(|e| e.to_string()).and_then(|f| {
        History::read_jsonl(BufReader::new(f)).map_err(|e| e.to_string())
    }) {
        Ok(h) => h,
        Err(e) => {
            eprintln!("{path}: {e}");
            return ExitCode::from(2);
        }
    };
    let verdict = match check_mpsc_fifo(&history) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("{path}: {e}");
            return ExitCode::from(2);
        }
    };
    println!("{} events: {verdict}", history.len());
    if history.len() <= BRUTE_FORCE_MAX_OPS {
        let exhaustive = brute_force_linearizable(&history).expect("size checked");
        println!("exhaustive search: {exhaustive}");
    }
    if verdict.is_linearizable() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
