//! Local minimality of the first-order phase for the ρ-weighted tracking functional.

use serde::{Deserialize, Serialize};

use nf_core::noise::RngStream;
use nf_core::phase::{ExpansionOptions, run_expansion, tracking_functional};
use nf_core::sim::Lab;

use super::{Check, Context, CriterionSummary, Report, loglog_slope, median, par_map};
use crate::LabError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sample {
    pub path: u64,
    pub t: f64,
    /// Central differences of D at a = C0(t).
    pub d1: f64,
    pub d2: f64,
    /// Same for the second-order functional in b at b = C1(t).
    pub e1: f64,
    pub e2: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimalityRow {
    pub epsilon: f64,
    pub samples: Vec<Sample>,
    pub median_abs_d1: f64,
    /// median D''/ε².
    pub curvature: f64,
    pub median_abs_e1: f64,
    /// median E''/ε⁴.
    pub curvature2: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub summary: CriterionSummary,
    pub step: f64,
    pub rows: Vec<OptimalityRow>,
    pub slope_d1: f64,
    pub slope_e1: f64,
    pub exact_argmin: f64,
    pub exact_min: f64,
}

impl Report for OptimalityReport {
    const KIND: &'static str = "optimality_report";
    fn summary(&self) -> &CriterionSummary {
        &self.summary
    }
}

/// First and second central differences of `f` at `x`.
fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> (f64, f64) {
    let (m, z, p) = (f(x - h), f(x), f(x + h));
    ((p - m) / (2.0 * h), (p - 2.0 * z + m) / (h * h))
}

pub fn exp_phase_optimality(ctx: &Context) -> Result<OptimalityReport, LabError> {
    let cfg = &ctx.cfg;
    let s = &cfg.sim;
    let oc = &cfg.optimality;
    let a = ctx.main()?;
    let ws = &a.ws;
    let noise = a.noise(&cfg.noise)?;
    let lab = Lab::new(ws, Some(&a.sp), s.dt, s.scheme);
    let eta = cfg.eta(&ws.grid);
    let h = oc.step;
    let keep: Vec<usize> = oc.sample_times.iter().map(|t| (t / s.dt).round() as usize).collect();
    let horizon = oc.sample_times.iter().cloned().fold(0.0, f64::max);

    let mut rows = Vec::new();
    for &eps in cfg.expansion.epsilon_ladder.iter().filter(|e| **e > 0.0) {
        let opts = ExpansionOptions {
            epsilon: eps,
            horizon,
            dt: s.dt,
            q_exponent: s.q_exponent,
            record_stride: s.record_stride,
            scheme: s.scheme,
            full_field: true,
            second_order: true,
            m_ladder: Vec::new(),
            stop_at_tau: true,
            keep_steps: keep.clone(),
        };
        let per_path = par_map(oc.n_paths, |p| -> Result<Vec<Sample>, LabError> {
            let mut rng = RngStream::new(cfg.seed, p as u64);
            let run = run_expansion(&lab, &noise, &eta.values, &opts, |_| rng.increments(noise.rank(), s.dt))?;
            // Only times reached before τ.
            let fields = run.fields.iter().filter(|f| f.t < run.tau || run.reached_horizon());
            Ok(fields
                .map(|f| {
                    let fr = lab.frame(f.t);
                    let u: Vec<f64> = fr.ub.iter().zip(&f.v).map(|(x, y)| x + y).collect();
                    let ct = ws.speed * f.t;
                    let (d1, d2) = central(|x| tracking_functional(&lab, &u, ct + eps * x, &fr.rho), f.c0, h);
                    let base = ct + eps * f.c0;
                    let w2 = lab.shifted(&a.sp.rho.values, base);
                    let (e1, e2) = central(|x| tracking_functional(&lab, &u, base + eps * eps * x, &w2), f.c1, h);
                    Sample {
                        path: p as u64,
                        t: f.t,
                        d1,
                        d2,
                        e1,
                        e2,
                    }
                })
                .collect())
        });
        let samples: Vec<Sample> = per_path
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .flatten()
            .collect();
        rows.push(OptimalityRow {
            epsilon: eps,
            median_abs_d1: median(&samples.iter().map(|s| s.d1.abs()).collect::<Vec<_>>()),
            curvature: median(&samples.iter().map(|s| s.d2 / (eps * eps)).collect::<Vec<_>>()),
            median_abs_e1: median(&samples.iter().map(|s| s.e1.abs()).collect::<Vec<_>>()),
            curvature2: median(&samples.iter().map(|s| s.e2 / eps.powi(4)).collect::<Vec<_>>()),
            samples,
        });
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let slope_d1 = loglog_slope(&eps, &rows.iter().map(|r| r.median_abs_d1).collect::<Vec<_>>());
    let slope_e1 = loglog_slope(&eps, &rows.iter().map(|r| r.median_abs_e1).collect::<Vec<_>>());

    // u = û: D on a small grid around 0 is minimal at a = 0 with value 0.
    let fr = lab.frame(0.0);
    let grid: Vec<f64> = (-4..=4).map(|k| k as f64 * h).collect();
    let vals: Vec<f64> = grid
        .iter()
        .map(|&x| tracking_functional(&lab, &fr.ub, x, &fr.rho))
        .collect();
    let (imin, exact_min) = vals
        .iter()
        .cloned()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let exact_argmin = grid[imin];

    let mut checks = vec![Check::ge("fitted exponent of |D'(C0)|", slope_d1, 2.3)];
    for r in &rows {
        checks.push(Check::le(
            &format!("|D''/eps^2 - 1| at eps={}", r.epsilon),
            (r.curvature - 1.0).abs(),
            0.2,
        ));
    }
    let mut notes: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "eps {}: {} samples, median |D'| {:.3e}, D''/eps^2 {:.4}; second order: median |E'| {:.3e}, E''/eps^4 {:.4}",
                r.epsilon,
                r.samples.len(),
                r.median_abs_d1,
                r.curvature,
                r.median_abs_e1,
                r.curvature2
            )
        })
        .collect();
    notes.push(format!("second-order functional: fitted exponent of |E'(C1)| {slope_e1:.3}"));
    notes.push(format!("u = u_hat: argmin {exact_argmin}, minimum {exact_min:e}"));
    Ok(OptimalityReport {
        summary: CriterionSummary::new(8, "phase optimality", checks, notes),
        step: h,
        rows,
        slope_d1,
        slope_e1,
        exact_argmin,
        exact_min,
    })
}
