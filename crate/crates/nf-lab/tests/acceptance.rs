//! The ten acceptance criteria on the builtin configuration, at full size.
//! Prints one PASS/FAIL line per criterion; takes about six minutes on one core.

use std::process::ExitCode;

use nf_lab::experiments::run_criterion;
use nf_lab::{Context, ExperimentConfig};

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut cfg = ExperimentConfig::builtin();
    cfg.output_dir = dir.path().to_path_buf();
    let ctx = Context::new(cfg);
    if let Err(e) = ctx.save_artifacts() {
        println!("acceptance: cannot build artifacts: {e}");
        return ExitCode::FAILURE;
    }
    let mut failed = Vec::new();
    for k in 1..=10u8 {
        match run_criterion(&ctx, k) {
            Ok(s) => {
                println!("{}", s.line());
                for n in &s.notes {
                    println!("      {n}");
                }
                if !s.passed {
                    failed.push(k);
                }
            }
            Err(e) => {
                println!("criterion {k:>2} FAIL (error: {e})");
                failed.push(k);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 10 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
