mod common;

use common::{fixture, params, symmetric};
use nf_core::Error;
use nf_core::model::GridSpec;
use nf_core::model::fd::derivative;
use nf_core::model::interp::eval_at;
use nf_core::spectral::{OperatorKind, assemble_operator, check_sign_structure, quadratic_form, sign_change};
use nf_core::wave::{level_set, ls_slope, solve_wave, wave_speed_oracle};

#[test]
fn front_solves_discrete_equation() {
    let ws = &fixture().ws;
    assert!(ws.residual < 1e-10);
    assert!(ws.d1.values.iter().all(|&v| v > 0.0));
    let fp = ws.fixed_points;
    let u = &ws.profile.values;
    assert!((u[0] - fp.a1).abs() < 1e-6);
    assert!((u[u.len() - 1] - fp.a2).abs() < 1e-6);
    // Pinned at the middle state through the interpolant; the linear level set is close.
    assert!((eval_at(&ws.grid, u, 0.0) - fp.a).abs() < 1e-10);
    let x0 = level_set(&ws.grid, u, fp.a).unwrap();
    assert!(x0.abs() < 0.05 * ws.grid.dx(), "{x0}");
}

#[test]
fn frozen_speed_on_coarse_grid() {
    // Regression value at N = 512; the time-stepping oracle below is independent.
    assert!((fixture().ws.speed - 0.576194775594).abs() < 1e-9);
}

#[test]
fn speed_agrees_with_time_stepping_oracle() {
    let c = wave_speed_oracle(&params(), &common::grid(), 40.0).unwrap();
    assert!((c - fixture().ws.speed).abs() / c < 1e-3, "oracle {c}");
}

#[test]
fn symmetric_threshold_gives_standing_reflected_front() {
    let ws = &symmetric().ws;
    assert!(ws.speed.abs() < 1e-10);
    let u = &ws.profile.values;
    let n = u.len();
    for i in 0..n {
        assert!((u[i] + u[n - 1 - i] - 1.0).abs() < 1e-8);
    }
}

#[test]
fn small_domain_is_rejected() {
    let g = GridSpec::new(2.0, 64).unwrap();
    assert!(solve_wave(&params(), &g, 1e-10).is_err());
}

#[test]
fn translation_mode_is_in_the_kernel() {
    let f = fixture();
    let op = assemble_operator(&f.ws, OperatorKind::LSharp);
    let lux = op.apply(&f.ws.d1.values);
    let scale = f.ws.d1.max_abs();
    // Interior only: the truncation acts at the edges.
    let n = lux.len();
    let interior = lux[n / 8..7 * n / 8].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(interior / scale < 1e-5, "{interior}");
}

#[test]
fn adjoint_pairs_with_translation_mode() {
    let f = fixture();
    let g = f.ws.grid;
    assert!(f.sp.adjoint_residual < 1e-10);
    assert!(f.sp.psi.values.iter().all(|&v| v > 0.0));
    let d = derivative(g.n(), g.dx(), 1).apply_vec(&f.ws.profile.values);
    assert!((g.dot(&f.sp.psi.values, &d) - 1.0).abs() < 1e-8);
    let dual = assemble_operator(&f.ws, OperatorKind::LSharpAdjoint);
    let r = dual.apply(&f.sp.psi.values);
    let scale = f.sp.psi.max_abs();
    assert!(r.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale < 1e-8);
}

#[test]
fn adjoint_pairing_on_smooth_fields() {
    // <L h, g> = <h, L* g> up to discretization error for bumps inside the domain.
    let f = fixture();
    let g = f.ws.grid;
    let a = assemble_operator(&f.ws, OperatorKind::LSharp);
    let b = assemble_operator(&f.ws, OperatorKind::LSharpAdjoint);
    let bump = |c: f64, w: f64| -> Vec<f64> { g.nodes().iter().map(|x| (-((x - c) / w).powi(2)).exp()).collect() };
    for (h, k) in [(bump(-3.0, 2.0), bump(1.0, 3.0)), (bump(0.0, 1.5), bump(0.5, 1.5))] {
        let lhs = g.dot(&a.apply(&h), &k);
        let rhs = g.dot(&h, &b.apply(&k));
        assert!((lhs - rhs).abs() < 1e-6 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }
}

#[test]
fn density_constants_are_consistent() {
    let sp = &fixture().sp;
    assert!(sp.rho.values.iter().all(|&v| v > 0.0));
    assert!((sp.l_rho - 1.0).abs() < 1e-12);
    assert!(sp.k_rho > 0.0 && sp.m_bound > 0.0);
    assert!(sp.rho_x_ratio <= sp.m_bound);
}

#[test]
fn frozen_gap_and_constants() {
    let sp = &fixture().sp;
    assert!((sp.gap - 0.5935844646).abs() < 1e-8, "{}", sp.gap);
    assert!((sp.k_rho - 7.6821271141).abs() < 1e-8);
    assert!((sp.m_bound - 3.2988752042).abs() < 1e-8);
    // The symmetric front has a larger gap.
    assert!(symmetric().sp.gap > sp.gap);
}

#[test]
fn dissipation_form_bounds_by_gap() {
    // <L h, h>_rho <= -kappa |h|_rho^2 on smooth interior bumps orthogonal to ψ.
    let f = fixture();
    let g = f.ws.grid;
    let op = assemble_operator(&f.ws, OperatorKind::LSharp);
    let ux = &f.ws.d1.values;
    for (center, width) in [(-5.0, 2.0), (0.0, 1.0), (4.0, 3.0)] {
        let mut h: Vec<f64> = g.nodes().iter().map(|x| (-((x - center) / width).powi(2)).exp()).collect();
        let a = g.dot(&h, &f.sp.psi.values) / g.dot(ux, &f.sp.psi.values);
        h.iter_mut().zip(ux).for_each(|(v, u)| *v -= a * u);
        let q = quadratic_form(&op, &f.sp.rho, &h);
        let n2 = g.wdot(&h, &h, &f.sp.rho.values);
        assert!(q <= -0.99 * f.sp.gap * n2, "bump at {center}: {q} vs {n2}");
    }
}

#[test]
fn sign_structure_has_single_crossings() {
    let f = fixture();
    let s = check_sign_structure(&f.ws, &f.sp.psi, &f.sp.phi);
    assert!(s.uxx.single && s.phi_x.single && s.psi_x.single && s.phi_positive);
}

#[test]
fn sign_change_examples() {
    assert!(sign_change(&[1.0, 0.5, 0.0, -1.0], 1e-12).single);
    assert!(!sign_change(&[1.0, -0.5, 1.0, -1.0], 1e-12).single);
    assert_eq!(sign_change(&[1.0, 2.0], 0.0).first_negative, None);
}

#[test]
fn least_squares_slope_of_line() {
    let t = [0.0, 1.0, 2.0, 3.5];
    let y: Vec<f64> = t.iter().map(|x| 2.5 * x - 1.0).collect();
    assert!((ls_slope(&t, &y) - 2.5).abs() < 1e-14);
}

#[test]
fn bad_gain_is_reported() {
    let p = nf_core::model::ModelParams::new(2.0, 0.5, 1.0);
    assert!(matches!(solve_wave(&p, &common::grid(), 1e-10), Err(Error::BistabilityViolated(_))));
}
