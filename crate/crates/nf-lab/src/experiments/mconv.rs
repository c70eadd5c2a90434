//! Finite-m phase companions against the m → ∞ coefficients on common noise.

use serde::{Deserialize, Serialize};

use nf_core::model::Field;
use nf_core::noise::RngStream;
use nf_core::phase::{ExpansionOptions, ExpansionRun, Record, run_expansion, track_phase_m};
use nf_core::sim::{Lab, SimPath};
use nf_core::wave::ls_slope;

use super::{Artifacts, Check, Context, CriterionSummary, Report, median, par_map};
use crate::LabError;
use crate::config::gaussian_bump;
use crate::io::{num, write_csv};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MRow {
    pub m: f64,
    /// Medians over paths of sup over [δ, T].
    pub d_c0: f64,
    pub d_c1: f64,
    pub d_v0: f64,
    pub d_v1: f64,
    pub rel_c1: f64,
    pub rel_v1: f64,
    pub consistency: f64,
    /// Median of sup over 0 < t < δ of |C^m0 - C0|.
    pub initial_layer: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MConvergenceReport {
    pub summary: CriterionSummary,
    pub delta: f64,
    pub n_paths: usize,
    pub rows: Vec<MRow>,
    pub identity_rel: f64,
    pub orth_max: f64,
    pub frozen_m: f64,
    pub frozen_rate: f64,
}

impl Report for MConvergenceReport {
    const KIND: &'static str = "m_convergence_report";
    fn summary(&self) -> &CriterionSummary {
        &self.summary
    }
}

fn sup(recs: &[&Record], f: impl Fn(&Record) -> f64) -> f64 {
    recs.iter().map(|r| f(r)).fold(0.0, f64::max)
}

/// Relaxation rate of C^m under frozen input u = û(· - ct - a), fitted from
/// ln|C^m - a| over the trace.
pub fn frozen_relaxation(a: &Artifacts, m: f64, shift: f64) -> Result<f64, LabError> {
    let ws = &a.ws;
    let h = 0.4 / m;
    let n = (6.0 / (m * h)).round() as usize;
    let lab = Lab::new(ws, Some(&a.sp), h, Default::default());
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
    let v_snapshots = times
        .iter()
        .map(|&t| {
            let a = lab.shifted(&ws.profile.values, ws.speed * t + shift);
            let b = lab.shifted(&ws.profile.values, ws.speed * t);
            Field {
                grid: ws.grid,
                values: a.iter().zip(&b).map(|(x, y)| x - y).collect(),
            }
        })
        .collect();
    let path = SimPath {
        seed: 0,
        path_index: 0,
        dt: h,
        times,
        v_snapshots,
        increments: Vec::new(),
        tau: n as f64 * h,
        norms: Vec::new(),
    };
    let tr = track_phase_m(&path, m, ws, &a.sp, 0.0)?;
    let (ts, ys): (Vec<f64>, Vec<f64>) = tr
        .times
        .iter()
        .zip(&tr.big_c_m)
        .map(|(t, c)| (*t, (shift - c).abs().ln()))
        .unzip();
    Ok(-ls_slope(&ts, &ys))
}

pub fn exp_m_convergence(ctx: &Context) -> Result<MConvergenceReport, LabError> {
    let cfg = &ctx.cfg;
    let mc = &cfg.m_convergence;
    let s = &cfg.sim;
    let a = ctx.main()?;
    let noise = a.noise(&cfg.noise)?;
    let lab = Lab::new(&a.ws, Some(&a.sp), s.dt, s.scheme);
    let eta = gaussian_bump(&a.ws.grid, mc.eta_amplitude, mc.eta_width);
    let opts = ExpansionOptions {
        epsilon: 0.0,
        horizon: s.horizon,
        dt: s.dt,
        q_exponent: 0.0,
        record_stride: s.record_stride,
        scheme: s.scheme,
        full_field: false,
        second_order: true,
        m_ladder: mc.m_ladder.clone(),
        stop_at_tau: false,
        keep_steps: Vec::new(),
    };
    let runs = par_map(mc.n_paths, |p| {
        let mut rng = RngStream::new(cfg.seed, p as u64);
        run_expansion(&lab, &noise, &eta.values, &opts, |_| rng.increments(noise.rank(), s.dt))
    });
    let runs: Vec<ExpansionRun> = runs.into_iter().collect::<Result<_, _>>()?;

    let delta = mc.delta;
    let rows: Vec<MRow> = mc
        .m_ladder
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let mut cols: [Vec<f64>; 8] = Default::default();
            for run in &runs {
                let late: Vec<&Record> = run.records.iter().filter(|r| r.t >= delta).collect();
                let early: Vec<&Record> = run.records.iter().filter(|r| r.t > 0.0 && r.t < delta).collect();
                let c1max = sup(&late, |r| r.c1.abs());
                let v1max = sup(&late, |r| r.v1_rho);
                let vals = [
                    sup(&late, |r| (r.m[j].c0 - r.c0).abs()),
                    sup(&late, |r| (r.m[j].c1 - r.c1).abs()),
                    sup(&late, |r| r.m[j].dv0_rho),
                    sup(&late, |r| r.m[j].dv1_rho),
                    sup(&late, |r| (r.m[j].c1 - r.c1).abs()) / c1max,
                    sup(&late, |r| r.m[j].dv1_rho) / v1max,
                    sup(&late, |r| r.m[j].consistency),
                    sup(&early, |r| (r.m[j].c0 - r.c0).abs()),
                ];
                for (c, v) in cols.iter_mut().zip(vals) {
                    c.push(v);
                }
            }
            MRow {
                m,
                d_c0: median(&cols[0]),
                d_c1: median(&cols[1]),
                d_v0: median(&cols[2]),
                d_v1: median(&cols[3]),
                rel_c1: median(&cols[4]),
                rel_v1: median(&cols[5]),
                consistency: median(&cols[6]),
                initial_layer: median(&cols[7]),
            }
        })
        .collect();

    let identity_rel = median(
        &runs
            .iter()
            .map(|run| {
                let num_ = run.records.iter().map(|r| (r.identity_lhs - r.identity_rhs).abs()).fold(0.0, f64::max);
                let den = run.records.iter().map(|r| r.identity_rhs.abs()).fold(0.0, f64::max);
                num_ / den
            })
            .collect::<Vec<_>>(),
    );
    let orth_max = runs.iter().map(|r| r.orth_max).fold(0.0, f64::max);
    let frozen_m = 1.0;
    let frozen_rate = frozen_relaxation(a, frozen_m, 0.05)?;

    write_csv(
        &ctx.output_dir().join("m_convergence.csv"),
        &["m", "d_c0", "d_c1", "d_v0", "d_v1", "consistency", "initial_layer"],
        rows.iter().map(|r| {
            vec![
                num(r.m),
                num(r.d_c0),
                num(r.d_c1),
                num(r.d_v0),
                num(r.d_v1),
                num(r.consistency),
                num(r.initial_layer),
            ]
        }),
    )?;

    let decreasing = |f: fn(&MRow) -> f64| rows.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    let checks = vec![
        Check::holds("sup |C^m0 - C0| strictly decreasing in m", decreasing(|r| r.d_c0)),
        Check::holds("sup ||v^m0 - v0||_rho strictly decreasing in m", decreasing(|r| r.d_v0)),
        Check::holds("sup ||v^m1 - v1||_rho strictly decreasing in m", decreasing(|r| r.d_v1)),
    ];
    let mut notes: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "m={}: C0 {:.3e}, C1 {:.3e} ({:.2}%), v0 {:.3e}, v1 {:.3e} ({:.2}%), consistency {:.2e}, (0,{delta}) layer {:.3e}",
                r.m,
                r.d_c0,
                r.d_c1,
                100.0 * r.rel_c1,
                r.d_v0,
                r.d_v1,
                100.0 * r.rel_v1,
                r.consistency,
                r.initial_layer
            )
        })
        .collect();
    notes.push(format!(
        "C1 decreasing in m: {}",
        rows.windows(2).all(|w| w[1].d_c1 < w[0].d_c1)
    ));
    notes.push(format!(
        "pairing identity (relative to max |rhs|) {identity_rel:.3e}, orthogonality {orth_max:.3e}"
    ));
    notes.push(format!("frozen input, m = {frozen_m}: relaxation rate {frozen_rate:.4}"));
    Ok(MConvergenceReport {
        summary: CriterionSummary::new(7, "m-convergence", checks, notes),
        delta,
        n_paths: mc.n_paths,
        rows,
        identity_rel,
        orth_max,
        frozen_m,
        frozen_rate,
    })
}
