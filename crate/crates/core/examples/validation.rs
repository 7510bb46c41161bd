//! Runs the quick acceptance suite, or the criteria named on the command line, and prints the JSON report.

use std::time::Instant;

use skewdiff::sde_engine::init_thread_pool;
use skewdiff::validation::criteria::{run_criterion, SuiteOptions, CRITERIA};
use skewdiff::validation::ValidationReport;

fn main() -> skewdiff::Result<()> {
    init_thread_pool();
    let wanted: Vec<String> = std::env::args().skip(1).collect();
    let opts = SuiteOptions::quick(1);
    let started = Instant::now();
    let mut checks = Vec::new();
    for (i, (name, _)) in CRITERIA.iter().enumerate() {
        if wanted.is_empty() || wanted.iter().any(|w| w == name) {
            let c = run_criterion(i, &opts);
            eprintln!("{}", c.summary_line());
            checks.push(c);
        }
    }
    let report = ValidationReport::new("quick", opts.seed, checks, started);
    println!("{}", report.to_json()?);
    Ok(())
}
