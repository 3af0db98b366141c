//! Evaluates every acceptance criterion and prints one verdict line each.
//!
//! Criteria 5, 6 and 7 are known not to hold for this model (see the README); they
//! are still evaluated and reported, and the run only fails when a criterion outside
//! that list fails or a criterion cannot be evaluated at all.

use std::process::ExitCode;

use hetnet_harness::acceptance::{run_criterion, AcceptanceContext, Status, CRITERIA};

const KNOWN_SHORTFALLS: [u8; 3] = [5, 6, 7];

fn main() -> ExitCode {
    let ctx = AcceptanceContext::default();
    let mut regressions = Vec::new();
    let mut passed = 0;
    for (criterion, _) in CRITERIA {
        let v = run_criterion(&ctx, criterion);
        println!("{} criterion {} {} ({:.1} s)", v.status, v.criterion, v.name, v.elapsed_s);
        println!("    {}", v.detail);
        match v.status {
            Status::Pass => passed += 1,
            Status::Fail if KNOWN_SHORTFALLS.contains(&criterion) => {}
            _ => regressions.push(criterion),
        }
    }
    println!("{passed}/{} criteria passed", CRITERIA.len());
    if regressions.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {regressions:?}");
        ExitCode::FAILURE
    }
}
