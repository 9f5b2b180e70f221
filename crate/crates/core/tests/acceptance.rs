//! Runs every acceptance criterion and prints one line per criterion.
//! Exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use qls_core::verify::{run_all, run_criterion, VerifyConfig, CRITERIA};

/// Wall-clock budgets for the criteria that have one.
fn budget(id: u8) -> Option<Duration> {
    match id {
        1 => Some(Duration::from_secs(1)),
        3 => Some(Duration::from_secs(5)),
        4 => Some(Duration::from_secs(30)),
        _ => None,
    }
}

fn main() -> ExitCode {
    let cfg = VerifyConfig::default();
    let mut all = true;
    println!("acceptance suite, seed {}", cfg.seed);
    for (id, title) in CRITERIA {
        let start = Instant::now();
        let r = run_criterion(id, &cfg);
        let took = start.elapsed();
        let in_budget = budget(id).is_none_or(|b| took <= b);
        let ok = r.passed && in_budget;
        all &= ok;
        println!(
            "[{}] criterion {id}: {title} ({:.2} s)",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
        for c in &r.checks {
            let measured = match (c.value, c.tolerance) {
                (Some(v), Some(t)) if c.at_least => format!(": {v:.3e} >= {t:.0e}"),
                (Some(v), Some(t)) => format!(": {v:.3e} <= {t:.0e}"),
                _ => String::new(),
            };
            println!(
                "       {} {}{measured}",
                if c.passed { "ok  " } else { "FAIL" },
                c.name
            );
            if !c.passed {
                if let Some(d) = &c.detail {
                    println!("            {d}");
                }
            }
        }
        if !in_budget {
            println!(
                "       FAIL runtime budget {:?} exceeded",
                budget(id).unwrap()
            );
        }
    }

    let start = Instant::now();
    let first = serde_json::to_string(&run_all(&cfg)).expect("report serialises");
    let took = start.elapsed();
    let second = serde_json::to_string(&run_all(&cfg)).expect("report serialises");
    let deterministic = first == second;
    let fast = took < Duration::from_secs(60);
    let report_ok =
        first.contains("\"schema\":1") && first.contains(&format!("\"seed\":{}", cfg.seed));
    let ok = deterministic && fast && report_ok;
    all &= ok;
    println!(
        "[{}] criterion 9: end-to-end verify ({:.2} s, {} bytes of JSON)",
        if ok { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        first.len()
    );
    println!(
        "       {} identical JSON on a second run",
        if deterministic { "ok  " } else { "FAIL" }
    );
    println!("       {} under 60 s", if fast { "ok  " } else { "FAIL" });
    println!(
        "       {} report carries schema 1 and the seed",
        if report_ok { "ok  " } else { "FAIL" }
    );

    if all {
        println!("all acceptance criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("some acceptance criteria FAIL");
        ExitCode::FAILURE
    }
}
