use std::path::Path;
use std::process::{Command, Output};

use nf_lab::config::DEFAULT_TOML;

fn nflab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nflab")).args(args).output().unwrap()
}

/// The default setup on a 512-node grid.
fn small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    std::fs::write(&p, DEFAULT_TOML.replace("n_points = 2048", "n_points = 512")).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn wave_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = nflab(&["--config", &cfg, "--output-dir", out.to_str().unwrap(), "wave"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("criterion  1"));
    }
    for f in ["wave.json", "spectral.json", "criterion_01.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let text = std::fs::read_to_string(a.join("wave.json")).unwrap();
    assert!(text.contains("\"schema_version\": 1") && text.contains("\"config_hash\"") && text.contains("\"seed\": 7"));
}

#[test]
fn missing_config_exits_with_two() {
    let o = nflab(&["--config", "/nonexistent/lab.toml", "wave"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_config_key_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, DEFAULT_TOML.replace("[model]", "[model]\nbeta = 1.0")).unwrap();
    let o = nflab(&["--config", p.to_str().unwrap(), "wave"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("beta"));
}

#[test]
fn report_without_results_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = nflab(&["--output-dir", dir.path().to_str().unwrap(), "report"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("not all criteria passed"));
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn bad_epsilon_ladder_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = nflab(&["--output-dir", dir.path().to_str().unwrap(), "expand", "--epsilon-ladder", "0.01,0.1"]);
    assert_eq!(o.status.code(), Some(2));
}
