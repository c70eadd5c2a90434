//! Deterministic checks on the front, the adjoint and the projected spectrum.

use serde::{Deserialize, Serialize};

use nf_core::model::{Field, ModelParams};
use nf_core::spectral::{OperatorKind, assemble_operator, quadratic_form};
use nf_core::wave::{solve_wave, wave_speed_oracle_with};

use super::{Check, Context, CriterionSummary, Report};
use crate::LabError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WaveReport {
    pub summary: CriterionSummary,
    pub speed: f64,
    pub residual: f64,
    pub centered_residual: f64,
    pub iterations: usize,
    pub fixed_points: [f64; 3],
    pub oracle_speed: f64,
    pub oracle_rel_error: f64,
    pub symmetric_speed: f64,
    pub symmetric_oracle_speed: f64,
    pub reflected_speed: f64,
}

impl Report for WaveReport {
    const KIND: &'static str = "wave_report";
    fn summary(&self) -> &CriterionSummary {
        &self.summary
    }
}

pub fn exp_wave(ctx: &Context) -> Result<WaveReport, LabError> {
    let cfg = &ctx.cfg;
    let a = ctx.main()?;
    let ws = &a.ws;
    let grid = cfg.grid_spec()?;
    let oracle_speed = wave_speed_oracle_with(&cfg.model_params(), &grid, cfg.wave.oracle_horizon, cfg.wave.oracle_dt)?;
    let oracle_rel_error = (oracle_speed - ws.speed).abs() / ws.speed.abs().max(1e-12);
    let sym = ctx.symmetric()?;
    let m = &cfg.model;
    let sym_params = ModelParams::new(m.gamma, super::SYMMETRIC_THETA, m.sigma);
    let symmetric_oracle_speed = wave_speed_oracle_with(&sym_params, &grid, cfg.wave.oracle_horizon, cfg.wave.oracle_dt)?;
    let reflected = solve_wave(&ModelParams::new(m.gamma, 1.0 - m.theta, m.sigma), &grid, cfg.wave.tol)?;
    let centered_residual = ws.centered_residual(8);

    let checks = vec![
        Check::le("newton residual", ws.residual, 1e-8),
        Check::le("oracle speed rel error", oracle_rel_error, 0.01),
        Check::le("symmetric |c|", sym.ws.speed.abs(), 1e-3),
        Check::le("symmetric oracle |c|", symmetric_oracle_speed.abs(), 1e-3),
    ];
    let notes = vec![
        format!("c = {:.10}, {} Newton iterations", ws.speed, ws.iterations),
        format!("centered-difference interior residual {centered_residual:.3e}"),
        format!(
            "reflection theta -> 1-theta: c = {:.10} (sum with c: {:.2e})",
            reflected.speed,
            reflected.speed + ws.speed
        ),
    ];
    let fp = ws.fixed_points;
    Ok(WaveReport {
        summary: CriterionSummary::new(1, "wave correctness", checks, notes),
        speed: ws.speed,
        residual: ws.residual,
        centered_residual,
        iterations: ws.iterations,
        fixed_points: [fp.a1, fp.a, fp.a2],
        oracle_speed,
        oracle_rel_error,
        symmetric_speed: sym.ws.speed,
        symmetric_oracle_speed,
        reflected_speed: reflected.speed,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdjointReport {
    pub summary: CriterionSummary,
    pub adjoint_residual: f64,
    pub psi_min: f64,
    pub psi_raw_min_ratio: f64,
    pub normalization_error: f64,
    pub sv_ratio: f64,
    pub symmetric_match_error: f64,
    pub pairing_discrepancy: f64,
}

impl Report for AdjointReport {
    const KIND: &'static str = "adjoint_report";
    fn summary(&self) -> &CriterionSummary {
        &self.summary
    }
}

/// Deterministic smooth test functions for pairing checks.
pub fn test_fields(grid: &nf_core::model::GridSpec, count: usize) -> Vec<Field> {
    (0..count)
        .map(|k| {
            let kf = k as f64;
            let center = -10.0 + 2.3 * kf % 20.0;
            let width = 1.0 + 0.7 * (kf % 5.0);
            let freq = 0.3 + 0.17 * kf;
            Field::from_fn(*grid, |x| {
                let z = (x - center) / width;
                (-z * z).exp() * (freq * x + kf).cos()
            })
        })
        .collect()
}

pub fn exp_adjoint(ctx: &Context) -> Result<AdjointReport, LabError> {
    let a = ctx.main()?;
    let (ws, sp) = (&a.ws, &a.sp);
    let g = ws.grid;
    let psi_min = sp.psi.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let normalization_error = (g.dot(&ws.d1.values, &sp.psi.values) - 1.0).abs();

    // At c = 0, ψ is F'(û) û_x up to normalization.
    let sym = ctx.symmetric()?;
    let gain = sym.ws.params.gain;
    let reference: Vec<f64> = sym
        .ws
        .profile
        .values
        .iter()
        .zip(&sym.ws.d1.values)
        .map(|(&u, &d)| gain.df(u) * d)
        .collect();
    let scale = g.dot(&sym.ws.d1.values, &reference);
    let pmax = sym.sp.psi.max_abs();
    let symmetric_match_error = reference
        .iter()
        .zip(&sym.sp.psi.values)
        .map(|(r, p)| (r / scale - p).abs())
        .fold(0.0, f64::max)
        / pmax;

    let l = assemble_operator(ws, OperatorKind::LSharp);
    let la = assemble_operator(ws, OperatorKind::LSharpAdjoint);
    let fields = test_fields(&g, 10);
    let pairing_discrepancy = fields
        .iter()
        .zip(fields.iter().rev())
        .map(|(p, q)| {
            let lhs = g.dot(&l.apply(&p.values), &q.values);
            let rhs = g.dot(&p.values, &la.apply(&q.values));
            (lhs - rhs).abs() / (p.norm() * q.norm())
        })
        .fold(0.0, f64::max);

    let checks = vec![
        Check::le("adjoint residual", sp.adjoint_residual, 1e-8),
        Check::gt("min psi", psi_min, 0.0),
        Check::le("<u_x, psi> - 1", normalization_error, 1e-10),
        Check::le("c=0 psi vs F'(u)u_x", symmetric_match_error, 1e-6),
    ];
    let notes = vec![
        format!("smallest singular value gap ratio {:.3e}", sp.sv_ratio),
        format!("raw min/max of psi before tail continuation {:.3e}", sp.psi_raw_min_ratio),
        format!("<L g, h> - <g, L* h> over 10 pairs (relative): {pairing_discrepancy:.3e}"),
    ];
    Ok(AdjointReport {
        summary: CriterionSummary::new(2, "adjoint correctness", checks, notes),
        adjoint_residual: sp.adjoint_residual,
        psi_min,
        psi_raw_min_ratio: sp.psi_raw_min_ratio,
        normalization_error,
        sv_ratio: sp.sv_ratio,
        symmetric_match_error,
        pairing_discrepancy,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralReport {
    pub summary: CriterionSummary,
    pub lsharp_residual: f64,
    pub kappa: f64,
    pub kappa_refined: f64,
    pub kappa_rel_change: f64,
    pub top_eigenvalues: Vec<f64>,
    pub basis_size: usize,
    pub rayleigh_u_x: f64,
    pub max_projected_excess: f64,
}

impl Report for SpectralReport {
    const KIND: &'static str = "spectral_report";
    fn summary(&self) -> &CriterionSummary {
        &self.summary
    }
}

pub fn exp_spectral(ctx: &Context) -> Result<SpectralReport, LabError> {
    let a = ctx.main()?;
    let (ws, sp) = (&a.ws, &a.sp);
    let g = ws.grid;
    let fine = ctx.refined()?;
    let kappa_rel_change = (fine.sp.gap - sp.gap).abs() / sp.gap.abs();
    let l = assemble_operator(ws, OperatorKind::LSharp);
    let ux = &ws.d1.values;
    let rayleigh_u_x = quadratic_form(&l, &sp.rho, ux) / g.wdot(ux, ux, &sp.rho.values);
    // <L πh, πh>_ρ + κ ||πh||²_ρ on smooth fields; the gap bounds it by 0 on the
    // resolved subspace.
    let max_projected_excess = test_fields(&g, 20)
        .iter()
        .map(|h| {
            let a = g.dot(&h.values, &sp.psi.values);
            let p: Vec<f64> = h.values.iter().zip(ux).map(|(v, u)| v - a * u).collect();
            let n2 = g.wdot(&p, &p, &sp.rho.values);
            (quadratic_form(&l, &sp.rho, &p) + sp.gap * n2) / n2
        })
        .fold(f64::NEG_INFINITY, f64::max);

    let checks = vec![
        Check::le("||L# u_x|| / ||u_x||", sp.lsharp_residual, 1e-8),
        Check::gt("kappa", sp.gap, 0.0),
        Check::le("kappa change under refinement", kappa_rel_change, 0.02),
    ];
    let notes = vec![
        format!("kappa = {:.6} (N={}), {:.6} (N={})", sp.gap, g.n(), fine.sp.gap, fine.ws.grid.n()),
        format!("Rayleigh quotient of u_x under the unprojected form {rayleigh_u_x:.3e}"),
        format!("max over 20 smooth fields of (<L πh, πh>_ρ + κ||πh||²_ρ)/||πh||²_ρ = {max_projected_excess:.3e}"),
    ];
    Ok(SpectralReport {
        summary: CriterionSummary::new(3, "spectral structure", checks, notes),
        lsharp_residual: sp.lsharp_residual,
        kappa: sp.gap,
        kappa_refined: fine.sp.gap,
        kappa_rel_change,
        top_eigenvalues: sp.gap_top.clone(),
        basis_size: sp.basis_size,
        rayleigh_u_x,
        max_projected_excess,
    })
}
