//! Acceptance gate: every numbered runtime guarantee, executed in order,
//! one pass/fail line per criterion, each held to its stated time budget.
//!
//! Runs as a plain binary (`harness = false`) so the checks execute
//! sequentially — wall times stay honest with no parallel test scheduling —
//! and the per-criterion lines always reach cargo's output.

use cat_core::selfcheck;
use std::process::ExitCode;

fn main() -> ExitCode {
    let budgets_millis: [u128; 12] = [
        1,       // 1: bitrate table is pure arithmetic
        5_000,   // 2: frame arithmetic over T = 1..=64
        30_000,  // 3: streaming equivalence, 100 inputs
        60_000,  // 4: causality, 50 cases
        10_000,  // 5: prefix consistency
        30_000,  // 6: gradient exactness, 20 stacks
        60_000,  // 7: codebook training vs k-means
        10_000,  // 8: progressive dropout law
        30_000,  // 9: loss masking, 100 cases
        1,       // 10: aggregate objective
        10_000,  // 11: bitstream round-trip, 1000 matrices
        120_000, // 12: pipeline closure on the desk bundle
    ];
    let results = selfcheck::run_all();
    assert_eq!(results.len(), budgets_millis.len());

    let mut failures = Vec::new();
    for (r, &budget) in results.iter().zip(&budgets_millis) {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!(
            "[{}] criterion {:2} {:<28} {:>6} ms  {}",
            status, r.id, r.name, r.millis, r.detail
        );
        if !r.passed {
            failures.push(format!("criterion {} ({}): {}", r.id, r.name, r.detail));
        }
        if r.millis > budget {
            failures.push(format!(
                "criterion {} took {} ms, budget {} ms",
                r.id, r.millis, budget
            ));
        }
    }
    if failures.is_empty() {
        println!("acceptance: 12 criteria passed");
        ExitCode::SUCCESS
    } else {
        for f in &failures {
            eprintln!("acceptance failure: {f}");
        }
        ExitCode::FAILURE
    }
}
