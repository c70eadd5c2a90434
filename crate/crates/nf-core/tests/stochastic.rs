mod common;

use common::fixture;
use nf_core::Error;
use nf_core::model::Field;
use nf_core::noise::{NoiseSpec, RngStream, make_noise, pair_quadratic, sample_increment};
use nf_core::phase::{ExpansionOptions, PairingCache, compute_c0, project_orth, run_expansion, track_phase_m};
use nf_core::sim::{Lab, Scheme, SimConfig, SimPath, run_path, run_with_increments, step_snfe, weighted_norms};
use proptest::prelude::*;

fn bump(center: f64, width: f64) -> Field {
    Field::from_fn(common::grid(), |x| (-((x - center) / width).powi(2)).exp())
}

fn sim_config(epsilon: f64, eta: Field) -> SimConfig {
    SimConfig {
        epsilon,
        horizon: 1.0,
        dt: 0.01,
        q_exponent: 0.4,
        initial_eta: eta,
        record_stride: 10,
        scheme: Scheme::Etd2,
    }
}

#[test]
fn noise_modes_are_orthonormal() {
    let nm = &fixture().noise;
    let g = nm.grid;
    for (i, a) in nm.modes.iter().enumerate() {
        for (j, b) in nm.modes.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g.dot(a, b) - want).abs() < 1e-12, "({i},{j})");
        }
    }
    let sum: f64 = nm.lambdas.iter().map(|l| l * l).sum();
    assert!((nm.trace_q - sum).abs() < 1e-12);
    assert_eq!(nm.lambdas[4], 0.5);
}

#[test]
fn projection_inverts_synthesis() {
    let nm = &fixture().noise;
    let db: Vec<f64> = (0..nm.rank()).map(|k| (k as f64 * 0.7).sin()).collect();
    let p = nm.project(&nm.field_from(&db));
    for k in 0..nm.rank() {
        assert!((p[k] - nm.lambdas[k] * db[k]).abs() < 1e-12);
    }
}

#[test]
fn bad_noise_spec_is_rejected() {
    let g = common::grid();
    let bad = NoiseSpec { rank: 0, ..NoiseSpec::default() };
    assert!(matches!(make_noise(&bad, &g, None), Err(Error::InvalidInput(_))));
    // More modes than the window can resolve.
    let tight = NoiseSpec { rank: 400, envelope: 0.5, ..NoiseSpec::default() };
    assert!(matches!(make_noise(&tight, &g, None), Err(Error::ModeSetDegenerate(_))));
}

#[test]
fn pairing_variance_matches_monte_carlo() {
    let nm = &fixture().noise;
    let g = bump(1.0, 3.0);
    let want = pair_quadratic(nm, &g);
    let dt = 0.01;
    let mut rng = RngStream::new(7, 0);
    let samples: Vec<f64> = (0..20_000).map(|_| g.dot(&sample_increment(nm, dt, &mut rng)) / dt.sqrt()).collect();
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (samples.len() - 1) as f64;
    // Standard error of the variance is about 1%.
    assert!((var / want - 1.0).abs() < 0.05, "{var} vs {want}");
}

#[test]
fn rng_streams_are_reproducible_and_seekable() {
    let mut a = RngStream::new(42, 3);
    let draws: Vec<Vec<f64>> = (0..5).map(|_| a.increments(4, 1.0)).collect();
    let mut b = RngStream::new(42, 3);
    b.seek(3);
    assert_eq!(b.increments(4, 1.0), draws[3]);
    assert_eq!(b.step, 4);
    let mut other = RngStream::new(42, 4);
    assert_ne!(other.increments(4, 1.0), draws[0]);
    let mut scaled = RngStream::new(42, 3);
    let s = scaled.increments(4, 0.25);
    for k in 0..4 {
        assert_eq!(s[k], 0.5 * draws[0][k]);
    }
}

#[test]
fn front_is_a_fixed_point_of_the_step() {
    let f = fixture();
    let zero = Field::zeros(f.ws.grid);
    let mut v = zero.clone();
    for k in 0..20 {
        v = step_snfe(&v, k as f64 * 0.05, 0.05, &zero, &f.ws, 0.1).unwrap();
    }
    assert!(v.max_abs() < 1e-6, "{}", v.max_abs());
}

#[test]
fn step_adds_scaled_noise() {
    let f = fixture();
    let v = bump(0.0, 2.0);
    let dw = bump(3.0, 1.0);
    let a = step_snfe(&v, 0.0, 0.01, &dw, &f.ws, 0.2).unwrap();
    let pre = Field { grid: v.grid, values: v.values.iter().zip(&dw.values).map(|(x, y)| x + 0.2 * y).collect() };
    let b = step_snfe(&pre, 0.0, 0.01, &Field::zeros(v.grid), &f.ws, 0.0).unwrap();
    assert_eq!(a.values, b.values);
}

#[test]
fn weighted_norms_follow_the_frame() {
    let f = fixture();
    let g = f.ws.grid;
    let h = bump(0.0, 2.0);
    let n0 = weighted_norms(&h, 0.0, &f.sp, &f.ws);
    assert!((n0.l2 - h.norm()).abs() < 1e-12);
    assert!((n0.l2_rho - g.wdot(&h.values, &h.values, &f.sp.rho.values).sqrt()).abs() < 1e-9 * n0.l2_rho);
    assert!(n0.h1_1plusrho > n0.l2_rho);
    // Moving the bump with the front leaves the weighted norm unchanged.
    let t = 2.0;
    let moved = bump(f.ws.speed * t, 2.0);
    let nt = weighted_norms(&moved, t, &f.sp, &f.ws);
    assert!((nt.l2_rho / n0.l2_rho - 1.0).abs() < 1e-5);
}

#[test]
fn replay_and_zero_noise_paths() {
    let f = fixture();
    let cfg = sim_config(0.05, bump(0.0, 2.0));
    let p1 = run_path(&cfg, &f.ws, &f.sp, &f.noise, &mut RngStream::new(1, 2)).unwrap();
    let p2 = run_path(&cfg, &f.ws, &f.sp, &f.noise, &mut RngStream::new(1, 2)).unwrap();
    let p3 = run_with_increments(&cfg, &f.ws, &f.sp, &f.noise, &p1.increments).unwrap();
    assert_eq!(p1, p2);
    assert_eq!(p1.v_snapshots, p3.v_snapshots);
    assert_eq!(p1.times.len(), 11);
    assert_eq!((p1.seed, p1.path_index), (1, 2));

    let still = sim_config(0.0, Field::zeros(f.ws.grid));
    let p = run_path(&still, &f.ws, &f.sp, &f.noise, &mut RngStream::new(1, 0)).unwrap();
    assert_eq!(p.tau, 1.0);
    assert!(p.v_snapshots.iter().all(|s| s.max_abs() < 1e-6));
}

#[test]
fn invalid_sim_config_is_rejected() {
    let f = fixture();
    let mut cfg = sim_config(0.05, Field::zeros(f.ws.grid));
    cfg.q_exponent = 1.0;
    assert!(run_path(&cfg, &f.ws, &f.sp, &f.noise, &mut RngStream::new(0, 0)).is_err());
}

#[test]
fn orthogonal_projection() {
    let f = fixture();
    let g = f.ws.grid;
    let lab = Lab::new(&f.ws, Some(&f.sp), 1.0, Scheme::default());
    for t in [0.0, 1.5] {
        let p = project_orth(&bump(-1.0, 2.0), t, &f.ws, &f.sp);
        let psi = lab.shifted(&f.sp.psi.values, f.ws.speed * t);
        assert!(g.dot(&p.values, &psi).abs() < 1e-12);
        let pp = project_orth(&p, t, &f.ws, &f.sp);
        assert!(pp.values.iter().zip(&p.values).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}

fn frozen_path(v: impl Fn(f64) -> Field, h: f64, n: usize) -> SimPath {
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
    SimPath {
        seed: 0,
        path_index: 0,
        dt: h,
        v_snapshots: times.iter().map(|&t| v(t)).collect(),
        times,
        increments: Vec::new(),
        tau: n as f64 * h,
        norms: Vec::new(),
    }
}

#[test]
fn phase_tracker_initial_rate_and_fixed_point() {
    let f = fixture();
    let g = f.ws.grid;
    let m = 2.0;
    // v = beta û_x: c^m(0) = -m beta <û_x, ψ> = -m beta.
    let beta = 0.03;
    let ux = Field { grid: g, values: f.ws.d1.values.iter().map(|d| beta * d).collect() };
    let tr = track_phase_m(&frozen_path(|_| ux.clone(), 0.1, 5), m, &f.ws, &f.sp, 0.0).unwrap();
    assert!((tr.c_m[0] + m * beta).abs() < 1e-9);
    // u = û(. - ct): C = 0 throughout.
    let tr = track_phase_m(&frozen_path(|_| Field::zeros(g), 0.1, 5), m, &f.ws, &f.sp, 0.0).unwrap();
    assert!(tr.big_c_m.iter().all(|c| c.abs() < 1e-12));
}

#[test]
fn phase_tracker_rejects_stiff_steps() {
    let f = fixture();
    let p = frozen_path(|_| Field::zeros(f.ws.grid), 0.1, 3);
    assert!(matches!(track_phase_m(&p, 10.0, &f.ws, &f.sp, 0.0), Err(Error::PhaseOdeUnstable(_))));
}

#[test]
fn initial_phase_is_minus_pairing() {
    let f = fixture();
    let eta = bump(0.5, 1.0);
    let p = frozen_path(|_| Field::zeros(f.ws.grid), 0.1, 2);
    let c0 = compute_c0(&p, &f.ws, &f.sp, &f.noise, &eta);
    assert_eq!(c0.len(), 1);
    assert!((c0[0] + eta.dot(&f.sp.psi)).abs() < 1e-15);
}

#[test]
fn phase_variance_curve_is_cumulative() {
    let f = fixture();
    let cache = PairingCache::new(&f.ws, &f.sp, &f.noise, 0.1, 10);
    let v = cache.variance_curve(&f.noise);
    assert_eq!(v.len(), 11);
    assert_eq!(v[0], 0.0);
    assert!(v.windows(2).all(|w| w[1] > w[0]));
    let first = 0.1 * pair_quadratic(&f.noise, &f.sp.psi);
    assert!((v[1] - first).abs() < 1e-12 * first);
}

#[test]
fn expansion_without_noise_or_data_is_trivial() {
    let f = fixture();
    let lab = Lab::new(&f.ws, Some(&f.sp), 0.01, Scheme::Etd2);
    let opts = ExpansionOptions {
        epsilon: 0.0,
        horizon: 0.5,
        dt: 0.01,
        q_exponent: 0.0,
        record_stride: 10,
        scheme: Scheme::Etd2,
        full_field: false,
        second_order: true,
        m_ladder: vec![1.0],
        stop_at_tau: false,
        keep_steps: Vec::new(),
    };
    let zero = vec![0.0; f.ws.grid.n()];
    let run = run_expansion(&lab, &f.noise, &zero, &opts, |_| vec![0.0; f.noise.rank()]).unwrap();
    assert!(run.reached_horizon());
    assert_eq!(run.records.len(), 6);
    for r in &run.records {
        assert_eq!((r.c0, r.c1, r.v0_l2, r.v1_rho), (0.0, 0.0, 0.0, 0.0));
    }
}

#[test]
fn deterministic_data_gives_constant_phase() {
    // With deterministic data only, C0 is constant and v0 relaxes.
    let f = fixture();
    let lab = Lab::new(&f.ws, Some(&f.sp), 0.01, Scheme::Etd2);
    let opts = ExpansionOptions {
        epsilon: 0.0,
        horizon: 1.0,
        dt: 0.01,
        q_exponent: 0.0,
        record_stride: 20,
        scheme: Scheme::Etd2,
        full_field: false,
        second_order: false,
        m_ladder: Vec::new(),
        stop_at_tau: false,
        keep_steps: Vec::new(),
    };
    let eta = bump(0.0, 1.0);
    let run = run_expansion(&lab, &f.noise, &eta.values, &opts, |_| vec![0.0; f.noise.rank()]).unwrap();
    let c = run.records[0].c0;
    assert!((c + eta.dot(&f.sp.psi)).abs() < 1e-14);
    assert!(run.records.iter().all(|r| r.c0 == c));
    assert!(run.records.last().unwrap().v0_l2 < run.records[0].v0_l2);
    assert!(run.orth_max < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn noise_synthesis_is_linear(a in prop::collection::vec(-1.0..1.0f64, 16), s in -2.0..2.0f64) {
        let nm = &fixture().noise;
        let fa = nm.field_from(&a);
        let sa: Vec<f64> = a.iter().map(|x| s * x).collect();
        let fs = nm.field_from(&sa);
        for (x, y) in fa.iter().zip(&fs) {
            prop_assert!((s * x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn rng_step_is_independent_of_history(seed in any::<u64>(), path in 0u64..1000, step in 0u64..50) {
        let mut a = RngStream::new(seed, path);
        for _ in 0..step {
            a.increments(3, 1.0);
        }
        let mut b = RngStream::new(seed, path);
        b.seek(step);
        prop_assert_eq!(a.increments(3, 1.0), b.increments(3, 1.0));
    }

    #[test]
    fn projection_removes_translation_component(center in -10.0..10.0f64, beta in -1.0..1.0f64) {
        let f = fixture();
        let h = bump(center, 2.0);
        let shifted = Field { grid: h.grid, values: h.values.iter().zip(&f.ws.d1.values).map(|(x, d)| x + beta * d).collect() };
        let a = project_orth(&h, 0.0, &f.ws, &f.sp);
        let b = project_orth(&shifted, 0.0, &f.ws, &f.sp);
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }
}
