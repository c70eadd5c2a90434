use nf_core::model::GridSpec;
use nf_lab::config::DEFAULT_TOML;
use nf_lab::experiments::{Check, CriterionSummary, loglog_slope, median, par_map, variance};
use nf_lab::io::{Envelope, read_json, read_snapshots, write_json, write_snapshots};
use nf_lab::report::collect;
use nf_lab::{ExperimentConfig, LabError};

#[test]
fn builtin_config_carries_the_reference_setup() {
    let c = ExperimentConfig::builtin();
    assert_eq!((c.model.gamma, c.model.theta, c.model.sigma), (8.0, 0.6, 1.0));
    assert_eq!((c.grid.half_length, c.grid.n_points), (40.0, 2048));
    assert_eq!(c.ou.theta, 0.5);
    assert_eq!(c.expansion.epsilon_ladder, vec![0.1, 0.05, 0.025, 0.0125]);
    assert_eq!(c.m_convergence.m_ladder, vec![10.0, 100.0, 1000.0]);
    assert_eq!(ExperimentConfig::load("default").unwrap(), c);
}

#[test]
fn unknown_keys_and_bad_values_are_config_errors() {
    let extra = DEFAULT_TOML.replace("[grid]", "[grid]\nspacing = 0.1");
    let e = ExperimentConfig::from_toml(&extra).unwrap_err();
    assert!(matches!(e, LabError::Config(_)));
    assert_eq!(e.exit_code(), 2);

    let ladder = DEFAULT_TOML.replace("[0.1, 0.05, 0.025, 0.0125]", "[0.05, 0.1]");
    assert!(matches!(ExperimentConfig::from_toml(&ladder), Err(LabError::Config(_))));
    let theta = DEFAULT_TOML.replace("theta = 0.6", "theta = 1.2");
    assert!(matches!(ExperimentConfig::from_toml(&theta), Err(LabError::Config(_))));
}

#[test]
fn missing_config_file_exits_with_two() {
    let e = ExperimentConfig::load("/nonexistent/lab.toml").unwrap_err();
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn hash_tracks_content_not_location() {
    let a = ExperimentConfig::builtin();
    let mut b = a.clone();
    b.output_dir = "elsewhere".into();
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 16);
    b.seed += 1;
    assert_ne!(a.hash(), b.hash());
}

#[test]
fn config_roundtrips_through_toml() {
    let a = ExperimentConfig::builtin();
    let text = toml::to_string(&a).unwrap();
    assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), a);
}

#[test]
fn envelope_roundtrip_and_schema_check() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("sub/x.json");
    write_json(&p, &Envelope::new("thing", "abc", 9, vec![1.5, 0.1 + 0.2])).unwrap();
    let back: Envelope<Vec<f64>> = read_json(&p).unwrap();
    assert_eq!((back.kind.as_str(), back.config_hash.as_str(), back.seed), ("thing", "abc", 9));
    assert_eq!(back.data, vec![1.5, 0.1 + 0.2]);

    let text = std::fs::read_to_string(&p).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 99");
    std::fs::write(&p, text).unwrap();
    assert!(matches!(read_json::<Vec<f64>>(&p), Err(LabError::Config(_))));
}

#[test]
fn snapshot_dump_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.bin");
    let g = GridSpec::new(2.0, 5).unwrap();
    let a = [0.0, 1.0, -2.5, f64::MIN_POSITIVE, 3.0];
    let b = [1e300, -0.0, 4.0, 5.0, 6.0];
    write_snapshots(&p, &g, &[&a, &b]).unwrap();
    assert_eq!(std::fs::metadata(&p).unwrap().len(), 44 + 2 * 5 * 8);
    let d = read_snapshots(&p).unwrap();
    assert_eq!((d.half_length, d.n_points, d.spacing), (2.0, 5, 1.0));
    assert_eq!(d.rows, vec![a.to_vec(), b.to_vec()]);

    assert!(write_snapshots(&p, &g, &[&a[..3]]).is_err());
    std::fs::write(&p, b"garbage").unwrap();
    assert!(read_snapshots(&p).is_err());
}

fn summary(k: u8, pass: bool) -> CriterionSummary {
    CriterionSummary::new(k, "t", vec![Check::le("x", if pass { 0.0 } else { 2.0 }, 1.0)], vec![])
}

#[test]
fn report_needs_every_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let t = collect(dir.path()).unwrap();
    assert!(!t.all_passed);
    assert!(t.verdicts.iter().all(|v| v.passed.is_none()));

    for k in 1..=10 {
        write_json(&dir.path().join(format!("criterion_{k:02}.json")), &Envelope::new("criterion", "h", 1, summary(k, true))).unwrap();
    }
    assert!(collect(dir.path()).unwrap().all_passed);

    write_json(&dir.path().join("criterion_04.json"), &Envelope::new("criterion", "h", 1, summary(4, false))).unwrap();
    let t = collect(dir.path()).unwrap();
    assert!(!t.all_passed);
    assert_eq!(t.verdicts[3].failed_checks.len(), 1);
    assert!(t.render().contains("FAIL"));
}

#[test]
fn checks_and_summary_lines() {
    assert!(Check::le("a", 1.0, 1.0).passed);
    assert!(!Check::gt("a", 1.0, 1.0).passed);
    assert!(Check::ge("a", 1.0, 1.0).passed);
    assert!(!Check::holds("a", false).passed);
    let s = summary(3, false);
    assert!(!s.passed);
    assert!(s.line().ends_with("FAIL (x)"));
    assert!(summary(3, true).line().ends_with("PASS"));
}

#[test]
fn statistics_helpers() {
    assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    assert!(median(&[]).is_nan());
    assert!((variance(&[1.0, 2.0, 3.0, 4.0]) - 5.0 / 3.0).abs() < 1e-15);
    let x = [0.1, 0.2, 0.4, 0.8];
    let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(2.5)).collect();
    assert!((loglog_slope(&x, &y) - 2.5).abs() < 1e-12);
}

#[test]
fn par_map_keeps_order() {
    let v = par_map(37, |i| i * i);
    assert_eq!(v, (0..37).map(|i| i * i).collect::<Vec<_>>());
    assert!(par_map(0, |i| i).is_empty());
}
