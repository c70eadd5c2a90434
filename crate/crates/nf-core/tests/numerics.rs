#![allow(clippy::needless_range_loop)]

use nf_core::model::GridSpec;
use nf_core::model::conv::{ConvPlan, Extension, gauss_legendre, reference_quadrature};
use nf_core::model::fd::derivative;
use nf_core::model::interp::{Shift, eval_at, shift};
use proptest::prelude::*;

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = b.iter().map(|y| y.abs()).fold(0.0, f64::max).max(1e-300);
    num / den
}

#[test]
fn gauss_legendre_integrates_polynomials() {
    let (x, w) = gauss_legendre(12);
    assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    for k in 0..24 {
        let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k)).sum();
        let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
        assert!((got - want).abs() < 1e-14, "degree {k}");
    }
}

#[test]
fn convolution_of_constant_is_constant() {
    let plan = ConvPlan::new(400, 0.1, 1.3);
    let out = plan.apply_vec(&vec![0.7; 400], Extension::Constant);
    assert!(out.iter().all(|v| (v - 0.7).abs() < 1e-14));
}

#[test]
fn convolution_of_cubic_matches_closed_form() {
    // For the Laplace kernel, w*p = p + sigma^2 p'' on cubics.
    let sigma = 1.0;
    let g = GridSpec::new(40.0, 2001).unwrap();
    let p = |x: f64| 0.3 + 0.1 * x - 0.02 * x * x + 0.001 * x * x * x;
    let ppp = |x: f64| -0.04 + 0.006 * x;
    let h: Vec<f64> = g.nodes().into_iter().map(p).collect();
    let plan = ConvPlan::for_grid(&g, sigma);
    for ext in [Extension::Constant, Extension::Zero] {
        let out = plan.apply_vec(&h, ext);
        for i in 0..g.n() {
            let x = g.x(i);
            if x.abs() <= 5.0 {
                let want = p(x) + sigma * sigma * ppp(x);
                assert!((out[i] - want).abs() < 1e-10, "x={x}: {} vs {want}", out[i]);
            }
        }
    }
}

#[test]
fn convolution_of_exponential_matches_closed_form() {
    // w*e^{ax} = e^{ax} / (1 - a^2 sigma^2) for |a| sigma < 1.
    let (sigma, a) = (1.0, 0.3);
    let g = GridSpec::new(40.0, 4001).unwrap();
    let h: Vec<f64> = g.nodes().into_iter().map(|x| (a * x).exp()).collect();
    let out = ConvPlan::for_grid(&g, sigma).apply_vec(&h, Extension::Zero);
    for i in 0..g.n() {
        let x = g.x(i);
        if x.abs() <= 5.0 {
            let want = (a * x).exp() / (1.0 - a * a * sigma * sigma);
            assert!((out[i] / want - 1.0).abs() < 1e-8, "x={x}");
        }
    }
}

#[test]
fn plan_matrix_agrees_with_apply() {
    let plan = ConvPlan::new(30, 0.2, 0.7);
    let h: Vec<f64> = (0..30).map(|i| ((i * i) as f64 * 0.37).sin()).collect();
    for ext in [Extension::Constant, Extension::Zero] {
        let m = plan.matrix(ext);
        let direct = plan.apply_vec(&h, ext);
        for i in 0..30 {
            let row: f64 = (0..30).map(|j| m[i * 30 + j] * h[j]).sum();
            assert!((row - direct[i]).abs() < 1e-13);
        }
    }
}

#[test]
fn shift_by_whole_cells_copies_interior() {
    let f: Vec<f64> = (0..64).map(|i| (i as f64 * 0.3).cos()).collect();
    let dx = 0.25;
    let out = shift(&f, dx, 3.0 * dx);
    for i in 10..54 {
        assert!((out[i] - f[i - 3]).abs() < 1e-14);
    }
    let back = shift(&f, dx, -2.0 * dx);
    for i in 10..54 {
        assert!((back[i] - f[i + 2]).abs() < 1e-14);
    }
}

#[test]
fn shift_continues_by_boundary_values() {
    let f = vec![2.0; 40];
    let mut out = vec![0.0; 40];
    Shift::new(0.1, 0.77).apply(&f, &mut out);
    assert!(out.iter().all(|v| (v - 2.0).abs() < 1e-13));
}

#[test]
fn eval_at_reproduces_nodes() {
    let g = GridSpec::new(5.0, 101).unwrap();
    let f: Vec<f64> = g.nodes().iter().map(|x| x.sin()).collect();
    for i in [0, 7, 50, 100] {
        assert!((eval_at(&g, &f, g.x(i)) - f[i]).abs() < 1e-13);
    }
    assert!((eval_at(&g, &f, 1.234) - 1.234f64.sin()).abs() < 1e-9);
}

#[test]
fn centered_derivatives_exact_on_polynomials() {
    let g = GridSpec::new(3.0, 61).unwrap();
    let x = g.nodes();
    let p: Vec<f64> = x.iter().map(|x| x.powi(6) - 2.0 * x.powi(3) + x).collect();
    let d1 = derivative(g.n(), g.dx(), 1).apply_vec(&p);
    let d2 = derivative(g.n(), g.dx(), 2).apply_vec(&p);
    for i in 0..g.n() {
        let xi = x[i];
        assert!((d1[i] - (6.0 * xi.powi(5) - 6.0 * xi * xi + 1.0)).abs() < 1e-9, "d1 at {xi}");
        assert!((d2[i] - (30.0 * xi.powi(4) - 12.0 * xi)).abs() < 1e-7, "d2 at {xi}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn plan_matches_quadrature_oracle(
        h in prop::collection::vec(-2.0..2.0f64, 8..80),
        dx in 0.02..0.5f64,
        sigma in 0.3..3.0f64,
        zero in any::<bool>(),
    ) {
        let ext = if zero { Extension::Zero } else { Extension::Constant };
        let fast = ConvPlan::new(h.len(), dx, sigma).apply_vec(&h, ext);
        let slow = reference_quadrature(&h, dx, sigma, ext);
        prop_assert!(rel_err(&fast, &slow) < 1e-11);
    }

    #[test]
    fn convolution_is_linear(
        a in prop::collection::vec(-1.0..1.0f64, 50),
        b in prop::collection::vec(-1.0..1.0f64, 50),
        s in -2.0..2.0f64,
    ) {
        let plan = ConvPlan::new(50, 0.1, 1.0);
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
        let (ca, cb) = (plan.apply_vec(&a, Extension::Zero), plan.apply_vec(&b, Extension::Zero));
        let cab = plan.apply_vec(&ab, Extension::Zero);
        for i in 0..50 {
            prop_assert!((cab[i] - ca[i] - s * cb[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn shift_exact_on_degree_seven(coef in prop::collection::vec(-1.0..1.0f64, 8), s in -2.0..2.0f64) {
        let g = GridSpec::new(4.0, 81).unwrap();
        let p = |x: f64| coef.iter().rev().fold(0.0, |acc, c| acc * (x / 4.0) + c);
        let f: Vec<f64> = g.nodes().into_iter().map(p).collect();
        let out = shift(&f, g.dx(), s);
        for i in 30..51 {
            prop_assert!((out[i] - p(g.x(i) - s)).abs() < 1e-11);
        }
    }

    #[test]
    fn shift_composes(s1 in -1.0..1.0f64, s2 in -1.0..1.0f64) {
        let g = GridSpec::new(20.0, 801).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|x| (-(x * x) / 8.0).exp()).collect();
        let two = shift(&shift(&f, g.dx(), s1), g.dx(), s2);
        let one = shift(&f, g.dx(), s1 + s2);
        prop_assert!(rel_err(&two, &one) < 1e-7);
    }
}
