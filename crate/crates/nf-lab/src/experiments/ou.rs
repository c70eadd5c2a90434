//! Orthogonality of v0, its OU plateau in L²(ρ), and zero-noise contraction.

use serde::{Deserialize, Serialize};

use nf_core::noise::{NoiseSpec, RngStream};
use nf_core::phase::{ExpansionOptions, ExpansionRun, run_expansion};
use nf_core::sim::{Lab, Scheme};
use nf_core::wave::ls_slope;

use super::{Artifacts, Check, Context, CriterionSummary, Report, mean, par_map};
use crate::LabError;
use crate::config::gaussian_bump;
use crate::io::{num, write_csv};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OuReport {
    pub summary: CriterionSummary,
    pub theta: f64,
    pub kappa: f64,
    pub l_rho: f64,
    pub trace_q: f64,
    pub trace_rho_q: f64,
    pub times: Vec<f64>,
    /// Ensemble mean of ‖v0(t)‖²_ρ_t.
    pub mean_sq: Vec<f64>,
    pub plateau_early: f64,
    pub plateau_late: f64,
    pub bound: f64,
    pub bound_plain: f64,
    pub orth_max: f64,
    pub decay_rate: f64,
    pub decay_kappa: f64,
    pub decay_ratio_max: f64,
    pub autocov_rate: f64,
}

impl Report for OuReport {
    const KIND: &'static str = "ou_report";
    fn summary(&self) -> &CriterionSummary {
        &self.summary
    }
}

fn v0_options(horizon: f64, dt: f64, stride: usize, keep_steps: Vec<usize>) -> ExpansionOptions {
    ExpansionOptions {
        epsilon: 0.0,
        horizon,
        dt,
        q_exponent: 0.0,
        record_stride: stride,
        scheme: Scheme::Etd2,
        full_field: false,
        second_order: false,
        m_ladder: Vec::new(),
        stop_at_tau: false,
        keep_steps,
    }
}

/// Fitted exponential rate of ‖v0‖_ρ over the second half of a zero-noise run,
/// and max_t ‖v0(t)‖_ρ / (‖v0(0)‖_ρ e^{-κt}).
pub fn zero_noise_decay(a: &Artifacts, spec: &NoiseSpec, horizon: f64, dt: f64) -> Result<(f64, f64, f64), LabError> {
    let silent = NoiseSpec { amplitude: 0.0, ..*spec };
    let noise = a.noise(&silent)?;
    let lab = Lab::new(&a.ws, Some(&a.sp), dt, Scheme::Etd2);
    let eta = gaussian_bump(&a.ws.grid, 1.0, 1.0);
    let stride = ((0.1 / dt).round() as usize).max(1);
    let run = run_expansion(&lab, &noise, &eta.values, &v0_options(horizon, dt, stride, Vec::new()), |_| {
        vec![0.0; noise.rank()]
    })?;
    let h = run.records.len() / 2;
    let ts: Vec<f64> = run.records[h..].iter().map(|r| r.t).collect();
    let ys: Vec<f64> = run.records[h..].iter().map(|r| r.v0_rho.ln()).collect();
    let r0 = run.records[0].v0_rho;
    let ratio = run
        .records
        .iter()
        .map(|r| r.v0_rho / (r0 * (-a.sp.gap * r.t).exp()))
        .fold(0.0, f64::max);
    Ok((-ls_slope(&ts, &ys), ratio, run.orth_max))
}

pub fn exp_ou_stationarity(ctx: &Context) -> Result<OuReport, LabError> {
    let cfg = &ctx.cfg;
    let o = &cfg.ou;
    let a = ctx.ou()?;
    let sp = &a.sp;
    let noise = a.noise(&cfg.noise)?;
    let lab = Lab::new(&a.ws, Some(sp), o.dt, Scheme::Etd2);
    let eta = vec![0.0; a.ws.grid.n()];
    let stride = ((0.1 / o.dt).round() as usize).max(1);
    let steps = (o.horizon / o.dt).round() as usize;
    // Fields for the autocovariance, every 0.5 over the second half.
    let lag_stride = ((0.5 / o.dt).round() as usize).max(1);
    let keep: Vec<usize> = (steps / 2..=steps).filter(|k| k % lag_stride == 0).collect();
    let opts = v0_options(o.horizon, o.dt, stride, keep);
    let runs = par_map(o.n_paths, |p| {
        let mut rng = RngStream::new(cfg.seed, p as u64);
        run_expansion(&lab, &noise, &eta, &opts, |_| rng.increments(noise.rank(), o.dt))
    });
    let runs: Vec<ExpansionRun> = runs.into_iter().collect::<Result<_, _>>()?;

    let times: Vec<f64> = runs[0].records.iter().map(|r| r.t).collect();
    let mean_sq: Vec<f64> = (0..times.len())
        .map(|k| mean(&runs.iter().map(|r| r.records[k].v0_rho.powi(2)).collect::<Vec<_>>()))
        .collect();
    let kappa = sp.gap;
    let window_mean = |lo: f64, hi: f64| {
        let xs: Vec<f64> = times
            .iter()
            .zip(&mean_sq)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .map(|(_, v)| *v)
            .collect();
        mean(&xs)
    };
    let t_plateau = 5.0 / kappa;
    let plateau_early = window_mean(t_plateau, t_plateau + 2.0);
    let plateau_late = window_mean(0.75 * o.horizon, o.horizon);
    let plateau_change = (plateau_early - plateau_late).abs() / plateau_late;
    let trace_rho_q = noise.trace_rho.unwrap_or(f64::NAN);
    let bound = sp.l_rho * trace_rho_q / kappa;
    let bound_plain = sp.l_rho * noise.trace_q / kappa;

    // ⟨v0(t), g⟩ at the kept steps; g a fixed bump.
    let g = gaussian_bump(&a.ws.grid, 1.0, 2.0);
    let series: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| r.fields.iter().map(|f| a.ws.grid.dot(&f.v0, &g.values)).collect())
        .collect();
    let max_lag = 6.min(series[0].len().saturating_sub(1));
    let acov: Vec<f64> = (0..=max_lag)
        .map(|l| {
            let xs: Vec<f64> = series
                .iter()
                .flat_map(|s| (0..s.len() - l).map(move |i| s[i] * s[i + l]))
                .collect();
            mean(&xs)
        })
        .collect();
    let lag_dt = lag_stride as f64 * o.dt;
    let (lt, ly): (Vec<f64>, Vec<f64>) = acov
        .iter()
        .enumerate()
        .take_while(|(_, c)| **c > 0.0)
        .map(|(l, c)| (l as f64 * lag_dt, c.ln()))
        .unzip();
    let autocov_rate = if lt.len() >= 2 { -ls_slope(&lt, &ly) } else { f64::NAN };

    let main = ctx.main()?;
    let (decay_rate, decay_ratio_max, decay_orth) = zero_noise_decay(main, &cfg.noise, o.decay_horizon, o.dt)?;
    let orth_max = runs.iter().map(|r| r.orth_max).fold(decay_orth, f64::max);

    write_csv(
        &ctx.output_dir().join("ou_curve.csv"),
        &["t", "mean_v0_rho_sq"],
        times.iter().zip(&mean_sq).map(|(t, v)| vec![num(*t), num(*v)]),
    )?;

    let checks = vec![
        Check::le("orthogonality <v0,psi_t> (relative)", orth_max, 1e-6),
        Check::le("plateau at 5/kappa vs late mean", plateau_change, 0.10),
        Check::le("plateau / (L_rho tr_rho(Q)/kappa)", plateau_early.max(plateau_late) / bound, 1.0),
        Check::ge("zero-noise decay rate / kappa", decay_rate / main.sp.gap, 0.95),
    ];
    let notes = vec![
        format!(
            "theta {}: kappa {kappa:.5}, plateau {plateau_early:.4e} on [{t_plateau:.2}, {:.2}], {plateau_late:.4e} on [{}, {}]",
            o.theta,
            t_plateau + 2.0,
            0.75 * o.horizon,
            o.horizon
        ),
        format!("bound with rho-weighted trace {bound:.4e}, with tr Q {bound_plain:.4e}"),
        format!(
            "zero-noise decay at theta {}: rate {decay_rate:.4} vs kappa {:.4}, max ||v0(t)|| / (||v0(0)|| e^(-kappa t)) = {decay_ratio_max:.3}",
            cfg.model.theta, main.sp.gap
        ),
        format!(
            "autocovariance of <v0, g> decays at {autocov_rate:.4} (kappa {kappa:.4}, loose target {:.4})",
            0.75 * kappa
        ),
    ];
    Ok(OuReport {
        summary: CriterionSummary::new(6, "orthogonality and OU", checks, notes),
        theta: o.theta,
        kappa,
        l_rho: sp.l_rho,
        trace_q: noise.trace_q,
        trace_rho_q,
        times,
        mean_sq,
        plateau_early,
        plateau_late,
        bound,
        bound_plain,
        orth_max,
        decay_rate,
        decay_kappa: main.sp.gap,
        decay_ratio_max,
        autocov_rate,
    })
}
