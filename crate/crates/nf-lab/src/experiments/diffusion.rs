//! Ensemble variance of C0 against the Itô quadrature of <ψ(·-cs), Qψ(·-cs)>.

use serde::{Deserialize, Serialize};

use nf_core::noise::{NoiseSpec, RngStream, pair_quadratic};
use nf_core::phase::PairingCache;

use super::{Check, Context, CriterionSummary, Report, variance};
use crate::LabError;
use crate::io::{num, write_csv};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: f64,
    pub mc_variance: f64,
    pub quadrature: f64,
    pub linear_proxy: f64,
    pub rel_error: f64,
    pub proxy_rel_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiffusionReport {
    pub summary: CriterionSummary,
    pub n_paths: usize,
    pub psi_q_psi: f64,
    pub checkpoints: Vec<Checkpoint>,
    /// Linear proxy against quadrature at T for the wide-envelope noise.
    pub wide_envelope_proxy_error: f64,
    pub zero_noise_variance: f64,
}

impl Report for DiffusionReport {
    const KIND: &'static str = "diffusion_report";
    fn summary(&self) -> &CriterionSummary {
        &self.summary
    }
}

pub fn exp_phase_diffusion(ctx: &Context) -> Result<DiffusionReport, LabError> {
    let cfg = &ctx.cfg;
    let a = ctx.main()?;
    let (ws, sp) = (&a.ws, &a.sp);
    let s = &cfg.sim;
    let steps = (s.horizon / s.dt).round() as usize;
    let noise = a.noise(&cfg.noise)?;
    let cache = PairingCache::new(ws, sp, &noise, s.dt, steps);
    let quad = cache.variance_curve(&noise);
    let psi_q_psi = pair_quadratic(&noise, &sp.psi);
    let c0_init = -cfg.eta(&ws.grid).dot(&sp.psi);

    let n_paths = cfg.diffusion.n_paths;
    let idx: Vec<usize> = cfg
        .diffusion
        .checkpoints
        .iter()
        .map(|f| (f * steps as f64).round() as usize)
        .collect();
    let mut samples = vec![Vec::with_capacity(n_paths); idx.len()];
    for p in 0..n_paths {
        let mut rng = RngStream::new(cfg.seed, p as u64);
        let inc: Vec<Vec<f64>> = (0..steps).map(|_| rng.increments(noise.rank(), s.dt)).collect();
        let c0 = cache.c0_path(&noise, c0_init, &inc);
        for (j, &k) in idx.iter().enumerate() {
            samples[j].push(c0[k]);
        }
    }
    let checkpoints: Vec<Checkpoint> = idx
        .iter()
        .zip(&samples)
        .map(|(&k, xs)| {
            let t = k as f64 * s.dt;
            let mc = variance(xs);
            let proxy = psi_q_psi * t;
            Checkpoint {
                t,
                mc_variance: mc,
                quadrature: quad[k],
                linear_proxy: proxy,
                rel_error: (mc - quad[k]).abs() / quad[k],
                proxy_rel_error: (proxy - quad[k]).abs() / quad[k],
            }
        })
        .collect();

    let wide = NoiseSpec {
        envelope: cfg.diffusion.wide_envelope,
        ..cfg.noise
    };
    let wide_noise = a.noise(&wide)?;
    let wide_cache = PairingCache::new(ws, sp, &wide_noise, s.dt, steps);
    let wide_quad = *wide_cache.variance_curve(&wide_noise).last().unwrap();
    let wide_proxy = pair_quadratic(&wide_noise, &sp.psi) * steps as f64 * s.dt;
    let wide_envelope_proxy_error = (wide_proxy - wide_quad).abs() / wide_quad;

    let silent = NoiseSpec {
        amplitude: 0.0,
        ..cfg.noise
    };
    let silent_noise = a.noise(&silent)?;
    let silent_cache = PairingCache::new(ws, sp, &silent_noise, s.dt, steps);
    let zero_noise_variance = *silent_cache.variance_curve(&silent_noise).last().unwrap();

    write_csv(
        &ctx.output_dir().join("diffusion.csv"),
        &["t", "mc_variance", "quadrature", "linear_proxy"],
        checkpoints
            .iter()
            .map(|c| vec![num(c.t), num(c.mc_variance), num(c.quadrature), num(c.linear_proxy)]),
    )?;

    let checks = checkpoints
        .iter()
        .map(|c| Check::le(&format!("Var C0 vs quadrature at t={}", c.t), c.rel_error, 0.10))
        .collect();
    let mut notes: Vec<String> = checkpoints
        .iter()
        .map(|c| {
            format!(
                "t={}: MC {:.4e}, quadrature {:.4e}, proxy <psi,Q psi> t {:.4e} (proxy off by {:.1}%)",
                c.t,
                c.mc_variance,
                c.quadrature,
                c.linear_proxy,
                100.0 * c.proxy_rel_error
            )
        })
        .collect();
    notes.push(format!(
        "envelope {}: linear proxy off by {:.2}% at T",
        cfg.diffusion.wide_envelope,
        100.0 * wide_envelope_proxy_error
    ));
    notes.push(format!("zero noise: quadrature variance {zero_noise_variance:e}"));
    Ok(DiffusionReport {
        summary: CriterionSummary::new(5, "phase diffusion", checks, notes),
        n_paths,
        psi_q_psi,
        checkpoints,
        wide_envelope_proxy_error,
        zero_noise_variance,
    })
}
