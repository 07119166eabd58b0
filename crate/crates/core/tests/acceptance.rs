//! Acceptance suite: runs criteria 1-10 and prints one PASS/FAIL line each.
//! Pass criterion ids as arguments to run a subset.

use std::process::ExitCode;

use lsnav::verify::{run_criterion, CRITERIA};

fn main() -> ExitCode {
    let ids: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).filter(|i| (1..=CRITERIA).contains(i)).collect();
    let ids = if ids.is_empty() { (1..=CRITERIA).collect() } else { ids };
    let mut failed = 0;
    for id in ids {
        let r = run_criterion(id);
        println!("{} criterion {id}: {} ({:.2}s) {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.elapsed_secs, r.detail);
        if !r.passed {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
