//! Linearization about the front: L^# v = -v + c v_x + w*(F'(û) v), its adjoint
//! null function ψ, the density ρ = ψ/û_x, the gap of L^# on the ρ-orthogonal
//! complement of û_x, and the tail constants of ρ.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::model::fd::derivative;
use crate::model::tails::{self, TailModel};
use crate::model::{ConvPlan, Extension, Field, GridSpec, conv_exp};
use crate::wave::{WaveSolution, transport_op};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    LSharp,
    LSharpAdjoint,
}

/// Dense discretization of L^# or of its adjoint, row-major.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub kind: OperatorKind,
    pub n: usize,
    pub entries: Vec<f64>,
}

impl OperatorMatrix {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let row = &self.entries[i * n..(i + 1) * n];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    pub fn to_mat(&self) -> Mat<f64> {
        let n = self.n;
        Mat::from_fn(n, n, |i, j| self.entries[i * n + j])
    }
}

/// Both operators use the zero-extended convolution (perturbations vanish at
/// infinity) and the upwind-biased transport stencil. The adjoint is discretized
/// directly rather than transposed: the interior rows coincide with the weighted
/// transpose, and the inflow boundary row carries no transport.
pub fn assemble_operator(ws: &WaveSolution, kind: OperatorKind) -> OperatorMatrix {
    let n = ws.grid.n();
    let dx = ws.grid.dx();
    let c = ws.speed;
    let wz = ConvPlan::for_grid(&ws.grid, ws.params.sigma()).matrix(Extension::Zero);
    let fp: Vec<f64> = ws.profile.values.iter().map(|&u| ws.params.gain.df(u)).collect();
    let mut entries = wz;
    match kind {
        OperatorKind::LSharp => {
            for i in 0..n {
                for j in 0..n {
                    entries[i * n + j] *= fp[j];
                }
                entries[i * n + i] -= 1.0;
            }
            transport_op(n, dx, c, false).add_to_dense(c, &mut entries);
        }
        OperatorKind::LSharpAdjoint => {
            for i in 0..n {
                for j in 0..n {
                    entries[i * n + j] *= fp[i];
                }
                entries[i * n + i] -= 1.0;
            }
            transport_op(n, dx, c, true).add_to_dense(-c, &mut entries);
        }
    }
    OperatorMatrix { kind, n, entries }
}

/// Relative level below which ψ is replaced by its exponential tail.
pub const PSI_FLOOR: f64 = 1e-12;
const PSI_SIGN_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct AdjointSolution {
    pub psi: Field,
    pub phi: Field,
    /// ||A ψ|| / ||ψ|| for the discrete adjoint A.
    pub residual: f64,
    /// Second-smallest over smallest singular value.
    pub sv_ratio: f64,
    /// min/max of ψ before tail continuation.
    pub raw_min_ratio: f64,
    pub tails: TailModel,
}

/// Null function of the discrete adjoint from the smallest singular triple,
/// positive and normalized by <û_x, ψ> = 1.
pub fn solve_adjoint(ws: &WaveSolution) -> Result<AdjointSolution> {
    let grid = ws.grid;
    let n = grid.n();
    let op = assemble_operator(ws, OperatorKind::LSharpAdjoint);
    let svd = op
        .to_mat()
        .svd()
        .map_err(|e| Error::Linalg(format!("svd: {e:?}")))?;
    crate::reset_vector_state();
    let s = svd.S().column_vector();
    let (s1, s2) = (s[n - 1], s[n - 2]);
    let sv_ratio = if s1 > 0.0 { s2 / s1 } else { f64::INFINITY };
    if sv_ratio < 10.0 {
        return Err(Error::NullSpaceNotSimple(sv_ratio));
    }
    let v = svd.V();
    let mut psi: Vec<f64> = (0..n).map(|i| v[(i, n - 1)]).collect();
    if psi.iter().sum::<f64>() < 0.0 {
        psi.iter_mut().for_each(|p| *p = -*p);
    }
    let pmax = psi.iter().cloned().fold(f64::MIN, f64::max);
    let pmin = psi.iter().cloned().fold(f64::MAX, f64::min);
    let raw_min_ratio = pmin / pmax;
    if raw_min_ratio < -PSI_SIGN_TOL {
        return Err(Error::PositivityViolated(raw_min_ratio));
    }
    let x = grid.nodes();
    let (mut psi, tail_model) = tails::regularize(&x, &psi, PSI_FLOOR, 3.0 * ws.params.sigma());
    if let Some(i) = psi.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::PositivityViolated(psi[i] / pmax));
    }
    let norm = grid.dot(&ws.d1.values, &psi);
    psi.iter_mut().for_each(|p| *p /= norm);

    let apsi = op.apply(&psi);
    let residual = grid.norm(&apsi) / grid.norm(&psi);
    let psi = Field { grid, values: psi };
    let phi = conv_exp(&psi, ws.params.sigma());
    Ok(AdjointSolution {
        psi,
        phi,
        residual,
        sv_ratio,
        raw_min_ratio,
        tails: tail_model,
    })
}

/// ρ = ψ / û_x.
pub fn density(ws: &WaveSolution, psi: &Field) -> Field {
    Field {
        grid: ws.grid,
        values: psi.values.iter().zip(&ws.d1.values).map(|(p, d)| p / d).collect(),
    }
}

/// <A h, h>_ρ.
pub fn quadratic_form(op: &OperatorMatrix, rho: &Field, h: &[f64]) -> f64 {
    rho.grid.wdot(&op.apply(h), h, &rho.values)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub kappa: f64,
    pub basis_size: usize,
    /// Largest eigenvalues of the projected symmetric form, descending.
    pub top: Vec<f64>,
}

/// Default Galerkin basis size relative to the grid.
pub const BASIS_FRACTION: f64 = 0.25;

pub fn sine_basis(grid: &GridSpec, k: usize) -> Mat<f64> {
    let l = grid.half_length;
    Mat::from_fn(grid.n(), k, |i, j| {
        ((j + 1) as f64 * std::f64::consts::PI * (grid.x(i) + l) / (2.0 * l)).sin()
    })
}

/// Symmetric part of the ρ-weighted form of L^# on {h in span(sines) : <h, û_x>_ρ = 0},
/// reduced to a standard eigenproblem. The sine span keeps the test functions
/// resolved; grid-scale modes of the discrete operator carry no information
/// about the continuum gap.
pub fn gap_spectrum(op: &OperatorMatrix, ws: &WaveSolution, rho: &Field, basis_size: usize) -> Result<GapEstimate> {
    if op.kind != OperatorKind::LSharp {
        return Err(Error::InvalidInput("gap estimate needs the L_sharp operator".into()));
    }
    let grid = ws.grid;
    let n = grid.n();
    let k = basis_size.clamp(2, n);
    let phi = sine_basis(&grid, k);
    let mw: Vec<f64> = grid.weights().iter().zip(&rho.values).map(|(w, r)| w * r).collect();

    let b: Vec<f64> = (0..k)
        .map(|j| (0..n).map(|i| phi[(i, j)] * mw[i] * ws.d1.values[i]).sum())
        .collect();
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut hv = b.clone();
    hv[0] += if b[0] >= 0.0 { bn } else { -bn };
    let hn2: f64 = hv.iter().map(|v| v * v).sum();
    // Columns 1.. of the Householder reflector span the complement of b.
    let z = Mat::<f64>::from_fn(k, k - 1, |i, j| {
        let jj = j + 1;
        let id = if i == jj { 1.0 } else { 0.0 };
        id - 2.0 * hv[i] * hv[jj] / hn2
    });
    let basis = &phi * &z;
    let a = op.to_mat();
    let abasis = &a * &basis;
    let mbasis = Mat::<f64>::from_fn(n, k - 1, |i, j| mw[i] * basis[(i, j)]);
    let form = mbasis.transpose() * &abasis;
    let gram = mbasis.transpose() * &basis;
    let m = k - 1;
    let hsym = Mat::<f64>::from_fn(m, m, |i, j| 0.5 * (form[(i, j)] + form[(j, i)]));
    let gsym = Mat::<f64>::from_fn(m, m, |i, j| 0.5 * (gram[(i, j)] + gram[(j, i)]));

    let ge = gsym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("gram eigen: {e:?}")))?;
    let gs = ge.S().column_vector();
    let gu = ge.U();
    let gmin = (0..m).map(|i| gs[i]).fold(f64::MAX, f64::min);
    if !(gmin > 0.0) {
        return Err(Error::Linalg("weighted Gram matrix not positive definite".into()));
    }
    let whiten = Mat::<f64>::from_fn(m, m, |i, j| gu[(i, j)] / gs[j].sqrt());
    let reduced = whiten.transpose() * &hsym * &whiten;
    let reduced = Mat::<f64>::from_fn(m, m, |i, j| 0.5 * (reduced[(i, j)] + reduced[(j, i)]));
    let re = reduced
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("form eigen: {e:?}")))?;
    let rs = re.S().column_vector();
    let mut ev: Vec<f64> = (0..m).map(|i| rs[i]).collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    crate::reset_vector_state();
    Ok(GapEstimate {
        kappa: -ev[0],
        basis_size: k,
        top: ev.into_iter().take(5).collect(),
    })
}

/// κ from the default basis; a non-positive value is an error.
pub fn estimate_gap(op: &OperatorMatrix, ws: &WaveSolution, rho: &Field) -> Result<f64> {
    let k = (BASIS_FRACTION * ws.grid.n() as f64).round() as usize;
    let g = gap_spectrum(op, ws, rho, k)?;
    if g.kappa > 0.0 {
        Ok(g.kappa)
    } else {
        Err(Error::GapNotObserved(g.kappa))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConstants {
    pub l_rho: f64,
    pub k_rho: f64,
    pub m_bound: f64,
    /// max over interior nodes of |ρ_x|/ρ.
    pub rho_x_ratio: f64,
    pub rho_x_bound_holds: bool,
}

pub fn assumption_constants(rho: &Field, ws: &WaveSolution) -> Result<AssumptionConstants> {
    let n = rho.grid.n();
    let r = &rho.values;
    if let Some(i) = r.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::AssumptionViolated(format!("rho not positive and finite at node {i}")));
    }
    let mut run = 0.0f64;
    let mut l_rho = 0.0f64;
    for &v in r {
        run = run.max(v);
        l_rho = l_rho.max(run / v);
    }
    let wr = conv_exp(rho, ws.params.sigma());
    let k_rho = wr.values.iter().zip(r).map(|(a, b)| a / b).fold(0.0, f64::max);
    let g = &ws.params.gain;
    let m_bound = ws
        .profile
        .values
        .iter()
        .zip(&ws.d1.values)
        .map(|(&u, &d)| (g.d2f(u) * d / g.df(u)).abs())
        .fold(0.0, f64::max)
        + 2.0 / ws.params.sigma();
    let rx = derivative(n, rho.grid.dx(), 1).apply_vec(r);
    let rho_x_ratio = (1..n - 1).map(|i| rx[i].abs() / r[i]).fold(0.0, f64::max);
    for v in [l_rho, k_rho, m_bound, rho_x_ratio] {
        if !v.is_finite() {
            return Err(Error::AssumptionViolated("unbounded ratio".into()));
        }
    }
    Ok(AssumptionConstants {
        l_rho,
        k_rho,
        m_bound,
        rho_x_ratio,
        rho_x_bound_holds: rho_x_ratio <= m_bound,
    })
}

/// Where a field goes from positive to negative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignChange {
    /// Last node with f > tol.
    pub last_positive: Option<usize>,
    /// First node with f < -tol.
    pub first_negative: Option<usize>,
    /// All clearly positive nodes precede all clearly negative ones.
    pub single: bool,
}

pub fn sign_change(f: &[f64], tol: f64) -> SignChange {
    let last_positive = f.iter().rposition(|&v| v > tol);
    let first_negative = f.iter().position(|&v| v < -tol);
    let single = match (last_positive, first_negative) {
        (Some(p), Some(q)) => p < q,
        _ => true,
    };
    SignChange {
        last_positive,
        first_negative,
        single,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignReport {
    pub uxx: SignChange,
    pub phi_x: SignChange,
    pub psi_x: SignChange,
    pub phi_positive: bool,
}

pub fn check_sign_structure(ws: &WaveSolution, psi: &Field, phi: &Field) -> SignReport {
    let n = ws.grid.n();
    let d = derivative(n, ws.grid.dx(), 1);
    let rel = |f: &[f64]| 1e-10 * f.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let phi_x = d.apply_vec(&phi.values);
    let psi_x = d.apply_vec(&psi.values);
    SignReport {
        uxx: sign_change(&ws.d2.values, 1e-10),
        phi_x: sign_change(&phi_x, rel(&phi_x)),
        psi_x: sign_change(&psi_x, rel(&psi_x)),
        phi_positive: phi.values.iter().all(|&v| v > 0.0),
    }
}

/// Least-squares slope of ln f over the nodes in [a, b].
pub fn tail_rate_fit(f: &Field, window: (f64, f64)) -> Result<f64> {
    let (a, b) = window;
    let g = &f.grid;
    let eps = 1e-9 * g.spacing;
    if !(a < b) || a < -g.half_length - eps || b > g.half_length + eps {
        return Err(Error::WindowOutsideGrid(a, b));
    }
    let idx: Vec<usize> = (0..g.n()).filter(|&i| g.x(i) >= a - eps && g.x(i) <= b + eps).collect();
    if idx.len() < 2 {
        return Err(Error::WindowOutsideGrid(a, b));
    }
    if idx.iter().any(|&i| !(f.values[i] > 0.0)) {
        return Err(Error::InvalidInput("tail fit needs a positive field on the window".into()));
    }
    let x = g.nodes();
    Ok(tails::log_linear_fit(&x, &f.values, idx.into_iter()).0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub grid: GridSpec,
    pub speed: f64,
    pub psi: Field,
    pub phi: Field,
    pub rho: Field,
    pub psi_x: Field,
    pub gap: f64,
    pub gap_top: Vec<f64>,
    pub basis_size: usize,
    pub l_rho: f64,
    pub k_rho: f64,
    pub m_bound: f64,
    pub rho_x_ratio: f64,
    pub adjoint_residual: f64,
    pub lsharp_residual: f64,
    pub sv_ratio: f64,
    pub psi_raw_min_ratio: f64,
    pub psi_tails: TailModel,
}

#[derive(Clone, Debug)]
pub struct SpectralOptions {
    pub basis_fraction: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            basis_fraction: BASIS_FRACTION,
        }
    }
}

/// Everything the stochastic layer needs from the linearization.
pub fn build_spectral(ws: &WaveSolution, opts: &SpectralOptions) -> Result<SpectralData> {
    let adj = solve_adjoint(ws)?;
    let rho = density(ws, &adj.psi);
    let lsharp = assemble_operator(ws, OperatorKind::LSharp);
    let lux = lsharp.apply(&ws.d1.values);
    let lsharp_residual = ws.grid.norm(&lux) / ws.grid.norm(&ws.d1.values);
    let k = (opts.basis_fraction * ws.grid.n() as f64).round() as usize;
    let gap = gap_spectrum(&lsharp, ws, &rho, k)?;
    let consts = assumption_constants(&rho, ws)?;
    let psi_x = Field {
        grid: ws.grid,
        values: derivative(ws.grid.n(), ws.grid.dx(), 1).apply_vec(&adj.psi.values),
    };
    Ok(SpectralData {
        grid: ws.grid,
        speed: ws.speed,
        psi: adj.psi,
        phi: adj.phi,
        rho,
        psi_x,
        gap: gap.kappa,
        gap_top: gap.top,
        basis_size: gap.basis_size,
        l_rho: consts.l_rho,
        k_rho: consts.k_rho,
        m_bound: consts.m_bound,
        rho_x_ratio: consts.rho_x_ratio,
        adjoint_residual: adj.residual,
        lsharp_residual,
        sv_ratio: adj.sv_ratio,
        psi_raw_min_ratio: adj.raw_min_ratio,
        psi_tails: adj.tails,
    })
}
