//! Acceptance suite at full size. Prints one line per criterion and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use skewdiff::sde_engine::init_thread_pool;
use skewdiff::validation::criteria::{run_criterion, SuiteOptions, CRITERIA};

fn main() -> ExitCode {
    init_thread_pool();
    let opts = SuiteOptions::core(1);
    let mut failed = Vec::new();
    println!("acceptance: {} criteria, seed {}", CRITERIA.len(), opts.seed);
    for (i, (name, _)) in CRITERIA.iter().enumerate() {
        let started = Instant::now();
        let check = run_criterion(i, &opts);
        println!(
            "[{:>2}] {} ({:.1} s) {}",
            i + 1,
            if check.pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64(),
            check.summary_line()
        );
        if !check.pass {
            failed.push(*name);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", CRITERIA.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed {failed:?}");
        ExitCode::FAILURE
    }
}
