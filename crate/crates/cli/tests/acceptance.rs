//! Acceptance criteria at full scale. Prints one PASS/FAIL line per
//! criterion and exits nonzero if any fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use hyperbary_cli::checks::{self, Checked};
use hyperbary_cli::report::Suite;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;
const GRID: usize = 64;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    body: fn(&mut ChaCha8Rng) -> Checked,
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn criteria() -> Vec<Criterion> {
    vec![
        Criterion {
            id: 1,
            name: "closed forms",
            limit: secs(5),
            body: |r| checks::closed_forms(r, 1000, 1.0),
        },
        Criterion {
            id: 2,
            name: "convexity",
            limit: secs(10),
            body: |r| checks::convexity(r, 1000, 1.0),
        },
        Criterion {
            id: 3,
            name: "oracle equivalence",
            limit: secs(60),
            body: |r| checks::oracle_equivalence(r, 50, 1e-3, 1.0),
        },
        Criterion {
            id: 4,
            name: "flow limit",
            limit: secs(30),
            body: |r| checks::flow_limit(r, 20, 1.0),
        },
        Criterion {
            id: 5,
            name: "p limit",
            limit: secs(60),
            body: |r| checks::p_limit(r, 20, 1.0),
        },
        Criterion {
            id: 6,
            name: "naturality",
            limit: secs(120),
            body: |r| checks::naturality(r, 20, 10, GRID, 1.0),
        },
        Criterion {
            id: 7,
            name: "balance and certificates",
            limit: secs(60),
            body: |r| checks::balance_certificates(r, 20, GRID, 1.0),
        },
        Criterion {
            id: 8,
            name: "derivative identity",
            limit: secs(120),
            body: |r| checks::derivative_identity(r, 20, GRID, 1.0),
        },
        Criterion {
            id: 9,
            name: "audits at b = 1",
            limit: secs(120),
            body: |r| checks::audits(r, 5, 20, GRID, 4.0, 1.0),
        },
        Criterion {
            id: 10,
            name: "non-Moebius gate",
            limit: secs(5),
            body: |r| checks::moebius_gate(r, 20, 1.0),
        },
    ]
}

fn summary(suites: &[Suite]) -> String {
    suites
        .iter()
        .map(|s| {
            format!(
                "{}{} {:.2e}/{:.0e}",
                if s.pass { "" } else { "!" },
                s.audit,
                s.max_violation,
                s.tolerance
            )
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn determinism() -> Result<(), String> {
    let bin = env!("CARGO_BIN_EXE_hyperbary");
    let dirs = [
        tempfile::tempdir().map_err(|e| e.to_string())?,
        tempfile::tempdir().map_err(|e| e.to_string())?,
    ];
    for d in &dirs {
        let status = Command::new(bin)
            .args(["verify", "--out"])
            .arg(d.path())
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("verify exited with {status}"));
        }
    }
    let read = |p: &Path| -> Result<Vec<(String, Vec<u8>)>, String> {
        let mut files: Vec<_> = std::fs::read_dir(p)
            .map_err(|e| e.to_string())?
            .map(|e| {
                let e = e.map_err(|e| e.to_string())?;
                let bytes = std::fs::read(e.path()).map_err(|e| e.to_string())?;
                Ok((e.file_name().to_string_lossy().into_owned(), bytes))
            })
            .collect::<Result<_, String>>()?;
        files.sort();
        Ok(files)
    };
    let (a, b) = (read(dirs[0].path())?, read(dirs[1].path())?);
    if a.is_empty() {
        return Err("verify wrote no reports".into());
    }
    if a != b {
        return Err("reports differ between runs".into());
    }
    Ok(())
}

fn main() -> ExitCode {
    let mut failed = 0;
    for c in criteria() {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + u64::from(c.id));
        let start = Instant::now();
        let result = (c.body)(&mut rng);
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(suites) => (suites.iter().all(|s| s.pass), summary(&suites)),
            Err(e) => (false, e.to_string()),
        };
        let in_time = elapsed <= c.limit;
        let ok = pass && in_time;
        failed += usize::from(!ok);
        println!(
            "criterion {:>2} {:<26} {}  {:.2} s (limit {} s{})  [{}]",
            c.id,
            c.name,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            c.limit.as_secs(),
            if in_time { "" } else { ", exceeded" },
            detail
        );
    }
    let det = determinism();
    failed += usize::from(det.is_err());
    println!(
        "criterion 11 {:<26} {}  [{}]",
        "determinism",
        if det.is_ok() { "PASS" } else { "FAIL" },
        det.err().unwrap_or_else(|| "byte-identical reports".into())
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
