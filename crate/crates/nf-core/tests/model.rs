use nf_core::Error;
use nf_core::model::{
    Field, GainParams, GridSpec, KernelParams, ModelParams, cubic_residual, decay_rate, decay_rates, validate_gain,
};
use proptest::prelude::*;

fn gain(theta: f64) -> GainParams {
    ModelParams::new(8.0, theta, 1.0).gain
}

#[test]
fn gain_derivatives_match_finite_differences() {
    let g = gain(0.6);
    let h = 1e-5;
    for &x in &[-0.3, 0.1, 0.45, 0.6, 0.9, 1.4] {
        let d1 = (g.f(x + h) - g.f(x - h)) / (2.0 * h);
        let d2 = (g.df(x + h) - g.df(x - h)) / (2.0 * h);
        assert!((g.df(x) - d1).abs() < 1e-8, "F' at {x}");
        assert!((g.d2f(x) - d2).abs() < 1e-7, "F'' at {x}");
        let (a, b, c) = g.eval3(x);
        assert_eq!((a, b, c), (g.f(x), g.df(x), g.d2f(x)));
    }
}

#[test]
fn kernel_is_normalized_laplace_density() {
    let k = KernelParams { sigma: 1.5 };
    assert!((k.w(0.0) - 1.0 / 3.0).abs() < 1e-15);
    assert!((k.w(3.0) - k.w(-3.0)).abs() < 1e-16);
    // Trapezoid on a wide grid.
    let g = GridSpec::new(60.0, 60_001).unwrap();
    let w = Field::from_fn(g, |x| k.w(x));
    let mass = g.dot(&w.values, &vec![1.0; g.n()]);
    assert!((mass - 1.0).abs() < 1e-6);
}

#[test]
fn fixed_points_match_independent_root_finder() {
    // Brent's method on a 1e5-cell scan, computed outside this crate.
    let fp = validate_gain(&gain(0.6)).unwrap();
    assert!((fp.a1 - 0.008749189864338576).abs() < 1e-12);
    assert!((fp.a - 0.7149331912671717).abs() < 1e-12);
    assert!((fp.a2 - 0.9366008556699009).abs() < 1e-12);
}

#[test]
fn symmetric_threshold_gives_reflected_fixed_points() {
    let fp = validate_gain(&gain(0.5)).unwrap();
    assert!((fp.a - 0.5).abs() < 1e-12);
    assert!((fp.a1 + fp.a2 - 1.0).abs() < 1e-12);
}

#[test]
fn gain_without_bistability_is_rejected() {
    assert!(matches!(
        validate_gain(&GainParams { gamma: 2.0, theta: 0.5 }),
        Err(Error::BistabilityViolated(1))
    ));
    assert!(matches!(
        validate_gain(&GainParams { gamma: 8.0, theta: 1.5 }),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn decay_rate_matches_companion_matrix_roots() {
    // Largest real root from numpy.roots on the cubic coefficients.
    let cases = [
        (0.5, 1.0, 0.5, 0.801937735804838),
        (0.5761911, 1.0, 0.3, 0.7092825265113327),
        (2.0, 0.5, 0.1, 0.8965236119441775),
    ];
    for (c, s, d, want) in cases {
        let got = decay_rate(c, s, d).unwrap();
        assert!((got - want).abs() < 1e-12, "c={c}: {got} vs {want}");
    }
}

#[test]
fn decay_rate_at_zero_speed_is_square_root() {
    assert_eq!(decay_rate(0.0, 1.0, 0.25).unwrap(), 0.5);
    assert_eq!(decay_rate(0.0, 2.0, 0.49).unwrap(), 0.7);
}

#[test]
fn decay_rate_rejects_bad_arguments() {
    for (c, s, d) in [(-0.1, 1.0, 0.5), (0.1, 0.0, 0.5), (0.1, 1.0, 0.0), (0.1, 1.0, 1.0)] {
        assert!(matches!(decay_rate(c, s, d), Err(Error::InvalidInput(_))));
    }
}

#[test]
fn decay_rates_use_both_stable_states() {
    let p = ModelParams::new(8.0, 0.6, 1.0);
    let fp = validate_gain(&p.gain).unwrap();
    let r = decay_rates(&p, &fp, 0.3).unwrap();
    assert!((r.delta1 - (1.0 - p.gain.df(fp.a1))).abs() < 1e-15);
    assert!((r.delta2 - (1.0 - p.gain.df(fp.a2))).abs() < 1e-15);
    assert!(r.tilde_delta1 > r.delta1.sqrt() && r.tilde_delta2 > r.delta2.sqrt());
}

#[test]
fn grid_spacing_and_lookup() {
    let g = GridSpec::new(40.0, 2048).unwrap();
    assert_eq!(g.dx(), 80.0 / 2047.0);
    assert_eq!(g.x(0), -40.0);
    assert!((g.x(2047) - 40.0).abs() < 1e-12);
    assert_eq!(g.index_at_or_after(g.x(100)), 100);
    assert_eq!(g.index_at_or_after(g.x(100) + 1e-6), 101);
    assert_eq!(g.index_at_or_after(-100.0), 0);
    assert_eq!(g.index_at_or_after(100.0), 2047);
    assert!(GridSpec::new(0.0, 10).is_err());
    assert!(GridSpec::new(1.0, 2).is_err());
}

#[test]
fn field_constructor_validates() {
    let g = GridSpec::new(1.0, 5).unwrap();
    assert!(Field::new(g, vec![0.0; 4]).is_err());
    assert!(Field::new(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).is_err());
    let f = Field::new(g, vec![0.0, -2.0, 1.0, 0.0, 0.0]).unwrap();
    assert_eq!(f.max_abs(), 2.0);
}

proptest! {
    #[test]
    fn decay_rate_solves_the_cubic(c in 0.0..5.0f64, sigma in 0.2..3.0f64, delta in 0.01..0.99f64) {
        let x = decay_rate(c, sigma, delta).unwrap();
        prop_assert!(cubic_residual(c, sigma, delta, x) <= 1e-10 * (1.0 + c + sigma));
        prop_assert!(x >= delta.sqrt() - 1e-15 && x <= 1.0);
    }

    #[test]
    fn decay_rate_increases_with_speed(c in 0.0..3.0f64, dc in 1e-3..1.0f64, delta in 0.01..0.99f64) {
        prop_assert!(decay_rate(c + dc, 1.0, delta).unwrap() > decay_rate(c, 1.0, delta).unwrap());
    }

    #[test]
    fn gain_reflection(theta in 0.35..0.65f64, x in -1.0..2.0f64) {
        // F_theta(x) = 1 - F_{1-theta}(1 - x).
        let a = gain(theta);
        let b = gain(1.0 - theta);
        prop_assert!((a.f(x) - (1.0 - b.f(1.0 - x))).abs() < 1e-14);
    }

    #[test]
    fn reflected_gain_reflects_fixed_points(theta in 0.4..0.6f64) {
        let a = validate_gain(&gain(theta)).unwrap();
        let b = validate_gain(&gain(1.0 - theta)).unwrap();
        prop_assert!((a.a1 - (1.0 - b.a2)).abs() < 1e-10);
        prop_assert!((a.a - (1.0 - b.a)).abs() < 1e-10);
        prop_assert!((a.a2 - (1.0 - b.a1)).abs() < 1e-10);
    }

    #[test]
    fn trapezoid_dot_is_symmetric_bilinear(v in prop::collection::vec(-1.0..1.0f64, 11), s in -3.0..3.0f64) {
        let g = GridSpec::new(2.0, 11).unwrap();
        let u: Vec<f64> = (0..11).map(|i| (i as f64).sin()).collect();
        prop_assert!((g.dot(&u, &v) - g.dot(&v, &u)).abs() < 1e-15);
        let sv: Vec<f64> = v.iter().map(|x| s * x).collect();
        prop_assert!((g.dot(&u, &sv) - s * g.dot(&u, &v)).abs() < 1e-13);
        prop_assert!((g.wdot(&u, &v, &[1.0; 11]) - g.dot(&u, &v)).abs() < 1e-15);
    }
}
