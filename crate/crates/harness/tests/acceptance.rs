use std::io::Write;

use circlaw_harness::acceptance::run_acceptance;

fn main() {
    let workers = std::env::var("CIRCLAW_WORKERS").ok().and_then(|w| w.parse().ok()).unwrap_or(0);
    println!("acceptance criteria");
    let report = run_acceptance(workers, |row| {
        println!("{row}");
        let _ = std::io::stdout().flush();
    });
    let passed = report.rows.len() - report.failures().len();
    println!("{passed}/{} criteria passed", report.rows.len());
    if !report.all_passed() {
        println!("failed criteria: {:?}", report.failures());
        std::process::exit(1);
    }
}
