//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use srra_harness::verify::{verify, Options};

struct Outcome {
    passed: bool,
    detail: String,
}

fn suites(names: &[&str]) -> Outcome {
    let mut passed = true;
    let mut detail = Vec::new();
    for name in names {
        match verify(name, &Options::default()) {
            Ok(report) => {
                for p in &report.properties {
                    passed &= p.passed;
                    let tag = if p.passed { "ok" } else { "FAILED" };
                    detail.push(format!("[{tag}] {}: {}", p.name, p.detail));
                }
            }
            Err(e) => {
                passed = false;
                detail.push(format!("{name}: error: {e}"));
            }
        }
    }
    Outcome {
        passed,
        detail: detail.join("\n      "),
    }
}

fn srra(args: &[&str], threads: usize, out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_srra"))
        .arg("--threads")
        .arg(threads.to_string())
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("SRRA_OUT_DIR")
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("srra {args:?} exited with {status}"))
    }
}

fn determinism() -> Outcome {
    let result = (|| -> Result<String, String> {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let jobs: [&[&str]; 4] = [
            &["run", "--task", "lrpp", "--n", "300", "--c1", "0.002", "--iterations", "2", "--erm", "local_search",
              "--noise", "uniform_flip", "--eta", "0.1", "--seed", "11", "--name", "lrpp"],
            &["run", "--task", "clustering", "--n", "120", "--k", "4", "--iterations", "2", "--erm", "local_search",
              "--noise", "uniform_flip", "--eta", "0.05", "--seed", "12", "--name", "clus"],
            &["run", "--task", "generic", "--n", "40", "--iterations", "2", "--noise", "uniform_flip", "--eta", "0.1",
              "--seed", "13", "--name", "gen"],
            &["sweep", "--task", "lrpp", "--n", "100", "--c1", "0.002", "--iterations", "1", "--erm", "local_search",
              "--noise", "uniform_flip", "--eta", "0.1", "--seed", "14", "--axis", "n", "--values", "100,200,400",
              "--name", "sw"],
        ];
        let one = tmp.path().join("t1");
        let eight = tmp.path().join("t8");
        for job in jobs {
            srra(job, 1, &one)?;
            srra(job, 8, &eight)?;
        }
        let mut names: Vec<_> = std::fs::read_dir(&one)
            .map_err(|e| e.to_string())?
            .map(|e| e.map(|e| e.file_name()).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        names.sort();
        let mut bytes = 0;
        for name in &names {
            let a = std::fs::read(one.join(name)).map_err(|e| e.to_string())?;
            let b = std::fs::read(eight.join(name)).map_err(|e| format!("{name:?}: {e}"))?;
            if a != b {
                return Err(format!("{name:?} differs between 1 and 8 threads"));
            }
            bytes += a.len();
        }
        let extra = std::fs::read_dir(&eight).map_err(|e| e.to_string())?.count();
        if extra != names.len() {
            return Err(format!("{} files on 1 thread, {extra} on 8", names.len()));
        }
        Ok(format!("{} files, {bytes} bytes identical", names.len()))
    })();
    match result {
        Ok(detail) => Outcome { passed: true, detail },
        Err(detail) => Outcome { passed: false, detail },
    }
}

fn main() {
    let criteria: Vec<(&str, Duration, Box<dyn Fn() -> Outcome>)> = vec![
        ("1 exhaustive exactness, ranking", Duration::from_secs(10), Box::new(|| suites(&["exhaustive-lrpp"]))),
        ("2 exhaustive exactness, clustering", Duration::from_secs(10), Box::new(|| suites(&["exhaustive-clustering"]))),
        (
            "3 unbiasedness",
            Duration::from_secs(120),
            Box::new(|| suites(&["unbiasedness-lrpp", "unbiasedness-clustering"])),
        ),
        ("4 SRRA inequality, generic construction", Duration::from_secs(60), Box::new(|| suites(&["srra-generic"]))),
        ("5 convergence", Duration::from_secs(300), Box::new(|| suites(&["convergence-lrpp"]))),
        ("6 query-complexity scaling", Duration::from_secs(600), Box::new(|| suites(&["query-scaling"]))),
        ("7 disagreement coefficients", Duration::from_secs(300), Box::new(|| suites(&["theta"]))),
        ("8 geometric", Duration::from_secs(120), Box::new(|| suites(&["geometric"]))),
        ("9 footrule sandwich", Duration::from_secs(600), Box::new(|| suites(&["sandwich"]))),
        ("10 determinism", Duration::from_secs(600), Box::new(determinism)),
    ];
    let mut failures = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let passed = outcome.passed && in_time;
        failures += usize::from(!passed);
        println!(
            "{} criterion {name} ({:.2}s, limit {}s{})",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time" },
        );
        println!("      {}", outcome.detail);
    }
    println!("{} of 10 criteria passed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
