use std::process::ExitCode;
use std::time::Instant;

use mtt_equiv_acceptance::CRITERIA;

fn main() -> ExitCode {
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in CRITERIA.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let verdict = if outcome.passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {n:>2} {verdict} {name} ({:.2}s): {}",
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
        if !outcome.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
