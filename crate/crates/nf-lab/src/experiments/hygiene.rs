//! Convolution oracle, strong self-convergence of the stepper, and replay.

use serde::{Deserialize, Serialize};

use nf_core::model::conv::{ConvPlan, Extension, reference_quadrature};
use nf_core::noise::{NoiseSpec, RngStream};
use nf_core::sim::{SimConfig, run_path, run_with_increments};

use super::checks::test_fields;
use super::{Check, Context, CriterionSummary, Report, loglog_slope, par_map};
use crate::LabError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrongRow {
    pub dt: f64,
    /// RMS over paths of ‖v_dt(T) - v_{dt/2}(T)‖.
    pub error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HygieneReport {
    pub summary: CriterionSummary,
    pub conv_rel_error_constant: f64,
    pub conv_rel_error_zero: f64,
    pub strong: Vec<StrongRow>,
    pub strong_slope: f64,
    pub replay_identical: bool,
    pub increments_identical: bool,
}

impl Report for HygieneReport {
    const KIND: &'static str = "hygiene_report";
    fn summary(&self) -> &CriterionSummary {
        &self.summary
    }
}

/// Max over inputs of max_i |plan - oracle| / max_i |oracle|.
fn conv_error(inputs: &[Vec<f64>], dx: f64, sigma: f64, ext: Extension) -> f64 {
    let plan = ConvPlan::new(inputs[0].len(), dx, sigma);
    inputs
        .iter()
        .map(|h| {
            let fast = plan.apply_vec(h, ext);
            let slow = reference_quadrature(h, dx, sigma, ext);
            let scale = slow.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
        })
        .fold(0.0, f64::max)
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

pub fn exp_hygiene(ctx: &Context) -> Result<HygieneReport, LabError> {
    let cfg = &ctx.cfg;
    let hy = &cfg.hygiene;
    let a = ctx.main()?;
    let ws = &a.ws;
    let g = ws.grid;
    let sigma = ws.params.sigma();

    let gain = ws.params.gain;
    let mut inputs: Vec<Vec<f64>> = vec![
        ws.profile.values.clone(),
        ws.profile.values.iter().map(|&u| gain.f(u)).collect(),
    ];
    inputs.extend(test_fields(&g, 4).into_iter().map(|f| f.values));
    let conv_rel_error_constant = conv_error(&inputs, g.dx(), sigma, Extension::Constant);
    let conv_rel_error_zero = conv_error(&inputs[2..], g.dx(), sigma, Extension::Zero);

    let spec = NoiseSpec {
        amplitude: hy.strong_amplitude,
        ..cfg.noise
    };
    let noise = a.noise(&spec)?;
    let sim = |dt: f64| SimConfig {
        epsilon: hy.strong_epsilon,
        horizon: hy.strong_horizon,
        dt,
        q_exponent: 0.0,
        initial_eta: cfg.eta(&g),
        record_stride: usize::MAX,
        scheme: cfg.sim.scheme,
    };
    let mut strong = Vec::new();
    for &dt in &hy.strong_dts {
        let fine = sim(0.5 * dt);
        let coarse = sim(dt);
        let errs = par_map(hy.strong_paths, |p| -> Result<f64, LabError> {
            let mut rng = RngStream::new(cfg.seed, p as u64);
            let fine_inc: Vec<Vec<f64>> = (0..fine.steps()).map(|_| rng.increments(noise.rank(), fine.dt)).collect();
            let coarse_inc: Vec<Vec<f64>> = fine_inc
                .chunks(2)
                .map(|w| w[0].iter().zip(&w[1]).map(|(x, y)| x + y).collect())
                .collect();
            let vf = run_with_increments(&fine, ws, &a.sp, &noise, &fine_inc)?;
            let vc = run_with_increments(&coarse, ws, &a.sp, &noise, &coarse_inc)?;
            let (xf, xc) = (&vf.v_snapshots.last().unwrap().values, &vc.v_snapshots.last().unwrap().values);
            let d: Vec<f64> = xf.iter().zip(xc).map(|(x, y)| x - y).collect();
            Ok(g.norm(&d).powi(2))
        });
        let errs: Vec<f64> = errs.into_iter().collect::<Result<_, _>>()?;
        strong.push(StrongRow {
            dt,
            error: (errs.iter().sum::<f64>() / errs.len() as f64).sqrt(),
        });
    }
    let strong_slope = loglog_slope(
        &strong.iter().map(|r| r.dt).collect::<Vec<_>>(),
        &strong.iter().map(|r| r.error).collect::<Vec<_>>(),
    );

    // Same seed twice, then the stored increments once more.
    let replay_cfg = SimConfig {
        epsilon: cfg.sim.epsilon,
        horizon: hy.strong_horizon,
        dt: cfg.sim.dt,
        q_exponent: cfg.sim.q_exponent,
        initial_eta: cfg.eta(&g),
        record_stride: cfg.sim.record_stride,
        scheme: cfg.sim.scheme,
    };
    let main_noise = a.noise(&cfg.noise)?;
    let p1 = run_path(&replay_cfg, ws, &a.sp, &main_noise, &mut RngStream::new(cfg.seed, 3))?;
    let p2 = run_path(&replay_cfg, ws, &a.sp, &main_noise, &mut RngStream::new(cfg.seed, 3))?;
    let p3 = run_with_increments(&replay_cfg, ws, &a.sp, &main_noise, &p1.increments)?;
    let same = |x: &nf_core::sim::SimPath, y: &nf_core::sim::SimPath| {
        x.v_snapshots.len() == y.v_snapshots.len()
            && x.v_snapshots
                .iter()
                .zip(&y.v_snapshots)
                .all(|(a, b)| bits(&a.values) == bits(&b.values))
            && x.tau.to_bits() == y.tau.to_bits()
    };
    let replay_identical = same(&p1, &p2) && same(&p1, &p3);
    let increments_identical = p1.increments.iter().zip(&p2.increments).all(|(a, b)| bits(a) == bits(b));

    let checks = vec![
        Check::le("conv vs quadrature oracle (relative)", conv_rel_error_constant.max(conv_rel_error_zero), 1e-10),
        Check::le("|strong slope - 1|", (strong_slope - 1.0).abs(), 0.1),
        Check::holds("bit-exact replay", replay_identical && increments_identical),
    ];
    let mut notes = vec![format!(
        "conv oracle: constant extension {conv_rel_error_constant:.3e}, zero extension {conv_rel_error_zero:.3e}"
    )];
    notes.extend(strong.iter().map(|r| format!("dt {:e}: RMS difference to dt/2 {:.4e}", r.dt, r.error)));
    notes.push(format!("strong self-convergence slope {strong_slope:.4}"));
    Ok(HygieneReport {
        summary: CriterionSummary::new(10, "numerics hygiene", checks, notes),
        conv_rel_error_constant,
        conv_rel_error_zero,
        strong,
        strong_slope,
        replay_identical,
        increments_identical,
    })
}
