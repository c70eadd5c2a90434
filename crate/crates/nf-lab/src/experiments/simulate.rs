//! Sample paths of the full equation with norm tables, snapshot dumps and
//! phase traces.

use serde::{Deserialize, Serialize};

use nf_core::noise::RngStream;
use nf_core::phase::{expansion_coefficients, track_phase_m};
use nf_core::sim::{SimConfig, SimPath, run_path};

use super::{Context, par_map};
use crate::LabError;
use crate::io::{num, write_csv, write_snapshots};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathSummary {
    pub path: u64,
    pub tau: f64,
    pub reached: bool,
    pub final_l2: f64,
    pub final_h1_1plusrho: f64,
    pub final_c0: f64,
    pub final_c1: f64,
    /// Relaxation rate of the finite-m trace.
    pub trace_m: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub seed: u64,
    pub epsilon: f64,
    pub sim: SimConfig,
    pub paths: Vec<PathSummary>,
}

pub fn run_simulate(ctx: &Context) -> Result<SimulateSummary, LabError> {
    let cfg = &ctx.cfg;
    let s = &cfg.sim;
    let a = ctx.main()?;
    let ws = &a.ws;
    let noise = a.noise(&cfg.noise)?;
    let sim = SimConfig {
        epsilon: s.epsilon,
        horizon: s.horizon,
        dt: s.dt,
        q_exponent: s.q_exponent,
        initial_eta: cfg.eta(&ws.grid),
        record_stride: s.record_stride,
        scheme: s.scheme,
    };
    let snap_dt = s.dt * s.record_stride as f64;
    // Largest m of the ladder the RK4 tracker accepts at this spacing, else the
    // stability limit itself.
    let trace_m = cfg
        .m_convergence
        .m_ladder
        .iter()
        .cloned()
        .filter(|m| m * snap_dt <= 0.5)
        .reduce(f64::max)
        .unwrap_or(0.5 / snap_dt);
    let dir = ctx.output_dir().to_path_buf();

    let paths: Vec<Result<(SimPath, PathSummary), LabError>> = par_map(s.n_paths, |p| {
        let mut rng = RngStream::new(cfg.seed, p as u64);
        let path = run_path(&sim, ws, &a.sp, &noise, &mut rng)?;
        let coef = expansion_coefficients(&path, ws, &a.sp, &noise, &sim.initial_eta, s.scheme)?;
        let trace = track_phase_m(&path, trace_m, ws, &a.sp, coef.c0[0] * s.epsilon)?;
        let last = path.norms.last().cloned().unwrap_or_default();
        let summary = PathSummary {
            path: p as u64,
            tau: path.tau,
            reached: path.tau >= s.horizon,
            final_l2: last.l2,
            final_h1_1plusrho: last.h1_1plusrho,
            final_c0: *coef.c0.last().unwrap(),
            final_c1: *coef.c1.last().unwrap(),
            trace_m,
        };
        let rows: Vec<&[f64]> = path.v_snapshots.iter().map(|f| f.values.as_slice()).collect();
        write_snapshots(&dir.join(format!("snapshots_path{p:03}.bin")), &ws.grid, &rows)?;
        write_csv(
            &dir.join(format!("phase_path{p:03}.csv")),
            &["t", "c_m", "C_m", "C0", "C1"],
            path.times.iter().enumerate().map(|(k, t)| {
                vec![num(*t), num(trace.c_m[k]), num(trace.big_c_m[k]), num(coef.c0[k]), num(coef.c1[k])]
            }),
        )?;
        Ok((path, summary))
    });
    let paths: Vec<(SimPath, PathSummary)> = paths.into_iter().collect::<Result<_, _>>()?;
    write_csv(
        &dir.join("paths.csv"),
        &["path", "t", "l2", "l2_rho", "h1_1plusrho"],
        paths.iter().flat_map(|(sp, ps)| {
            sp.times.iter().zip(&sp.norms).map(move |(t, n)| {
                vec![ps.path.to_string(), num(*t), num(n.l2), num(n.l2_rho), num(n.h1_1plusrho)]
            })
        }),
    )?;
    Ok(SimulateSummary {
        seed: cfg.seed,
        epsilon: s.epsilon,
        sim,
        paths: paths.into_iter().map(|(_, s)| s).collect(),
    })
}
