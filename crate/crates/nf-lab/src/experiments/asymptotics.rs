//! Tail rates of û_x, φ and ρ against the cubic roots, and the ρ constants.

use serde::{Deserialize, Serialize};

use nf_core::model::{DecayRates, cubic_residual, decay_rate, decay_rates};
use nf_core::spectral::{SignReport, check_sign_structure, tail_rate_fit};

use super::{Artifacts, Check, Context, CriterionSummary, Report};
use crate::LabError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailFits {
    pub rates: DecayRates,
    /// Fitted slope of ln û_x on the outflow-side window; theory -δ̃₂/σ.
    pub ux_right_slope: f64,
    pub ux_right_theory: f64,
    /// Fitted slope of ln û_x on the far side; growth bounded by √δ₁/σ.
    pub ux_left_slope: f64,
    pub phi_right_slope: f64,
    /// Fitted slope of ln ρ on the left window and the band it should sit in.
    pub rho_left_slope: f64,
    pub rho_band: (f64, f64),
}

fn tail_fits(a: &Artifacts) -> Result<TailFits, LabError> {
    let ws = &a.ws;
    let sigma = ws.params.sigma();
    let l = ws.grid.half_length;
    // Rates are defined for c >= 0; for c < 0 the picture is mirrored.
    let c = ws.speed.abs();
    let mirror = ws.speed < 0.0;
    let mut rates = decay_rates(&ws.params, &ws.fixed_points, c)?;
    if mirror {
        rates = DecayRates {
            delta1: rates.delta2,
            delta2: rates.delta1,
            tilde_delta1: decay_rate(c, sigma, rates.delta2)?,
            tilde_delta2: decay_rate(c, sigma, rates.delta1)?,
        };
    }
    let (right, left) = if mirror {
        ((-0.75 * l, -0.5 * l), (0.5 * l, 0.75 * l))
    } else {
        ((0.5 * l, 0.75 * l), (-0.75 * l, -0.5 * l))
    };
    let s = if mirror { -1.0 } else { 1.0 };
    let ux_right_slope = s * tail_rate_fit(&ws.d1, right)?;
    let ux_left_slope = s * tail_rate_fit(&ws.d1, left)?;
    let phi_right_slope = s * tail_rate_fit(&a.sp.phi, right)?;
    let rho_left_slope = s * tail_rate_fit(&a.sp.rho, left)?;
    Ok(TailFits {
        ux_right_theory: -rates.tilde_delta2 / sigma,
        rho_band: (
            (rates.tilde_delta1 - rates.delta1.sqrt()) / sigma,
            rates.tilde_delta1 / sigma,
        ),
        rates,
        ux_right_slope,
        ux_left_slope,
        phi_right_slope,
        rho_left_slope,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CubicAudit {
    pub max_residual: f64,
    pub zero_speed_error: f64,
    pub monotone: bool,
    pub large_speed_root: f64,
}

/// Roots over a ladder of speeds and both stable-state contractions.
pub fn cubic_audit(sigma: f64, deltas: &[f64]) -> Result<CubicAudit, LabError> {
    let speeds: Vec<f64> = (0..=60).map(|k| if k == 0 { 0.0 } else { 1e-3 * 1.2f64.powi(k) }).collect();
    let mut max_residual = 0.0f64;
    let mut zero_speed_error = 0.0f64;
    let mut monotone = true;
    let mut large_speed_root = f64::NAN;
    for &d in deltas {
        let mut prev = 0.0;
        for &c in &speeds {
            let x = decay_rate(c, sigma, d)?;
            max_residual = max_residual.max(cubic_residual(c, sigma, d, x));
            if c == 0.0 {
                zero_speed_error = zero_speed_error.max((x - d.sqrt()).abs());
            }
            monotone &= x >= prev;
            prev = x;
        }
        large_speed_root = decay_rate(1e6, sigma, d)?;
    }
    Ok(CubicAudit {
        max_residual,
        zero_speed_error,
        monotone,
        large_speed_root,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub summary: CriterionSummary,
    pub tails: TailFits,
    pub symmetric_tails: TailFits,
    pub cubic: CubicAudit,
    pub l_rho: f64,
    pub k_rho: f64,
    pub m_bound: f64,
    pub l_rho_refined: f64,
    pub k_rho_refined: f64,
    pub rho_x_ratio: f64,
    pub signs: SignReport,
}

impl Report for AsymptoticsReport {
    const KIND: &'static str = "asymptotics_report";
    fn summary(&self) -> &CriterionSummary {
        &self.summary
    }
}

pub fn exp_asymptotics(ctx: &Context) -> Result<AsymptoticsReport, LabError> {
    let a = ctx.main()?;
    let sp = &a.sp;
    let sigma = a.ws.params.sigma();
    let tails = tail_fits(a)?;
    let symmetric_tails = tail_fits(ctx.symmetric()?)?;
    let cubic = cubic_audit(sigma, &[tails.rates.delta1, tails.rates.delta2, 0.25])?;
    let fine = ctx.refined()?;
    let rel = |x: f64, y: f64| (x - y).abs() / x.abs();
    let signs = check_sign_structure(&a.ws, &sp.psi, &sp.phi);
    let tail_err = rel(tails.ux_right_theory, tails.ux_right_slope);

    let checks = vec![
        Check::le("u_x right-tail rate vs cubic", tail_err, 0.05),
        Check::le("cubic root residual", cubic.max_residual, 1e-10),
        Check::le("root at c=0 minus sqrt(delta)", cubic.zero_speed_error, 1e-12),
        Check::holds("root nondecreasing in c", cubic.monotone),
        Check::holds("L_rho, K_rho finite", sp.l_rho.is_finite() && sp.k_rho.is_finite()),
        Check::le("L_rho change under refinement", rel(sp.l_rho, fine.sp.l_rho), 0.05),
        Check::le("K_rho change under refinement", rel(sp.k_rho, fine.sp.k_rho), 0.05),
        Check::holds("|rho_x| <= M rho nodewise", sp.rho_x_ratio <= sp.m_bound),
    ];
    let (lo, hi) = tails.rho_band;
    let sym_theory = symmetric_tails.rates.delta2.sqrt() / sigma;
    let notes = vec![
        format!(
            "delta = ({:.6}, {:.6}), tilde delta = ({:.6}, {:.6}) at c = {:.6}",
            tails.rates.delta1, tails.rates.delta2, tails.rates.tilde_delta1, tails.rates.tilde_delta2, a.ws.speed
        ),
        format!(
            "u_x right tail slope {:.6} vs {:.6}; phi right tail slope {:.6}",
            tails.ux_right_slope, tails.ux_right_theory, tails.phi_right_slope
        ),
        format!(
            "u_x left tail growth {:.6}, bound sqrt(delta1)/sigma = {:.6}",
            tails.ux_left_slope,
            tails.rates.delta1.sqrt() / sigma
        ),
        format!(
            "rho left-tail growth {:.6}, band [{lo:.6}, {hi:.6}] {}",
            tails.rho_left_slope,
            if tails.rho_left_slope >= lo && tails.rho_left_slope <= hi { "inside" } else { "outside" }
        ),
        format!(
            "c=0: u_x right tail slope {:.6} vs -sqrt(delta2)/sigma = {:.6}",
            symmetric_tails.ux_right_slope, -sym_theory
        ),
        format!("root at c=1e6: {:.6}", cubic.large_speed_root),
        format!(
            "L_rho {:.6} / {:.6}, K_rho {:.6} / {:.6}, M {:.6}, max |rho_x|/rho {:.6}",
            sp.l_rho, fine.sp.l_rho, sp.k_rho, fine.sp.k_rho, sp.m_bound, sp.rho_x_ratio
        ),
        format!(
            "sign structure: u_xx single change {}, phi_x single change {}, psi_x single change {}, phi > 0 {}",
            signs.uxx.single, signs.phi_x.single, signs.psi_x.single, signs.phi_positive
        ),
    ];
    Ok(AsymptoticsReport {
        summary: CriterionSummary::new(9, "asymptotics", checks, notes),
        tails,
        symmetric_tails,
        cubic,
        l_rho: sp.l_rho,
        k_rho: sp.k_rho,
        m_bound: sp.m_bound,
        l_rho_refined: fine.sp.l_rho,
        k_rho_refined: fine.sp.k_rho,
        rho_x_ratio: sp.rho_x_ratio,
        signs,
    })
}
