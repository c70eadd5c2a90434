//! Traveling front û(x - ct) of u_t = -u + w*F(u).

use faer::Mat;
use faer::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::fd::{BandOp, derivative};
use crate::model::interp;
use crate::model::tails::{self, TailModel};
use crate::model::{ConvPlan, Extension, Field, FixedPoints, GridSpec, ModelParams, validate_gain};
use crate::sim::{AmariStepper, Scheme};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveSolution {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub profile: Field,
    pub d1: Field,
    pub d2: Field,
    pub d3: Field,
    /// Signed speed; positive when the front moves right.
    pub speed: f64,
    pub fixed_points: FixedPoints,
    /// Infinity norm of the discrete front equation at convergence.
    pub residual: f64,
    pub iterations: usize,
    /// Exponential continuation used for the far tails of û_x.
    pub tails: TailModel,
}

#[derive(Clone, Debug)]
pub struct WaveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for WaveOptions {
    fn default() -> Self {
        WaveOptions {
            tol: 1e-11,
            max_iter: 40,
        }
    }
}

/// Relative level below which the computed û_x is replaced by its exponential tail.
pub const D1_FLOOR: f64 = 1e-10;
const D23_FLOOR: f64 = 1e-6;

/// Upwind-biased ten-point first derivative for a transport term.
///
/// `adjoint = false` discretizes c ∂x (information flows against c), `true`
/// discretizes -c ∂x. The inflow row carries no transport; the forward operator
/// also drops the outflow row so the boundary nodes only see the convolution.
pub fn transport_op(n: usize, dx: f64, c: f64, adjoint: bool) -> BandOp {
    let right_biased = (c >= 0.0) != adjoint;
    let mut op = if right_biased {
        BandOp::biased(n, dx, -4, 5)
    } else {
        BandOp::biased(n, dx, -5, 4)
    };
    if adjoint {
        op.zero_row(if c >= 0.0 { 0 } else { n - 1 });
    } else {
        op.zero_row(0);
        op.zero_row(n - 1);
    }
    op
}

struct Residual<'a> {
    params: &'a ModelParams,
    plan: ConvPlan,
    dx: f64,
    pin: Vec<(usize, f64)>,
    a: f64,
}

impl Residual<'_> {
    fn eval(&self, u: &[f64], c: f64) -> (Vec<f64>, Vec<f64>) {
        let n = u.len();
        let t = transport_op(n, self.dx, c, false);
        let fu: Vec<f64> = u.iter().map(|&v| self.params.gain.f(v)).collect();
        let wf = self.plan.apply_vec(&fu, Extension::Constant);
        let tu = t.apply_vec(u);
        let mut r = vec![0.0; n + 1];
        for i in 0..n {
            r[i] = c * tu[i] - u[i] + wf[i];
        }
        r[n] = self.pin.iter().map(|&(j, w)| w * u[j]).sum::<f64>() - self.a;
        (r, tu)
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn solve_wave(params: &ModelParams, grid: &GridSpec, tol: f64) -> Result<WaveSolution> {
    solve_wave_with(
        params,
        grid,
        &WaveOptions {
            tol,
            ..Default::default()
        },
    )
}

/// Newton iteration on (û, c) with the phase pinned by û(0) = a.
pub fn solve_wave_with(params: &ModelParams, grid: &GridSpec, opts: &WaveOptions) -> Result<WaveSolution> {
    let fp = validate_gain(&params.gain)?;
    let n = grid.n();
    let dx = grid.dx();
    let sigma = params.sigma();
    let x = grid.nodes();

    let (pst, pw) = interp::point_weights(grid, 0.0);
    let mut pin: Vec<(usize, f64)> = Vec::new();
    for (q, &w) in pw.iter().enumerate() {
        let j = (pst + q as isize).clamp(0, n as isize - 1) as usize;
        match pin.iter_mut().find(|(k, _)| *k == j) {
            Some(e) => e.1 += w,
            None => pin.push((j, w)),
        }
    }
    let res = Residual {
        params,
        plan: ConvPlan::for_grid(grid, sigma),
        dx,
        pin,
        a: fp.a,
    };
    let wmat = res.plan.matrix(Extension::Constant);

    let p = (fp.a - fp.a1) / (fp.a2 - fp.a1);
    let x0 = sigma * (1.0 / p - 1.0).ln();
    let mut u: Vec<f64> = x
        .iter()
        .map(|&xi| fp.a1 + (fp.a2 - fp.a1) / (1.0 + (-(xi - x0) / sigma).exp()))
        .collect();
    let mut c = 0.0;

    let (mut r, mut tu) = res.eval(&u, c);
    let mut iterations = 0;
    while norm_inf(&r) > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::WaveDiverged {
                iterations,
                residual: norm_inf(&r),
            });
        }
        iterations += 1;
        let t = transport_op(n, dx, c, false);
        let fpu: Vec<f64> = u.iter().map(|&v| params.gain.df(v)).collect();
        let mut jac = Mat::<f64>::zeros(n + 1, n + 1);
        for i in 0..n {
            let row = &wmat[i * n..(i + 1) * n];
            for j in 0..n {
                jac[(i, j)] = row[j] * fpu[j];
            }
            jac[(i, i)] -= 1.0;
            let (st, w) = t.row(i);
            for (q, wq) in w.iter().enumerate() {
                jac[(i, st + q)] += c * wq;
            }
            jac[(i, n)] = tu[i];
        }
        for &(j, w) in &res.pin {
            jac[(n, j)] = w;
        }
        let mut step = Mat::<f64>::from_fn(n + 1, 1, |i, _| -r[i]);
        jac.partial_piv_lu().solve_in_place(step.as_mut());
        crate::reset_vector_state();

        let r0 = norm2(&r);
        let mut lambda = 1.0;
        loop {
            let ut: Vec<f64> = (0..n).map(|i| u[i] + lambda * step[(i, 0)]).collect();
            let ct = c + lambda * step[(n, 0)];
            let (rt, tut) = res.eval(&ut, ct);
            if norm2(&rt) <= (1.0 - 1e-4 * lambda) * r0 || lambda < 1e-3 {
                u = ut;
                c = ct;
                r = rt;
                tu = tut;
                break;
            }
            lambda *= 0.5;
        }
    }
    let residual = norm_inf(&r);

    let d1_raw = derivative(n, dx, 1).apply_vec(&u);
    let mut d2 = derivative(n, dx, 2).apply_vec(&u);
    let mut d3 = derivative(n, dx, 3).apply_vec(&u);
    let (d1, tail_model) = tails::regularize(&x, &d1_raw, D1_FLOOR, 3.0 * sigma);
    let dmax = d1.iter().cloned().fold(0.0, f64::max);
    let imax = d1.iter().position(|&v| v == dmax).unwrap_or(0);
    for i in 0..n {
        if d1[i] >= D23_FLOOR * dmax {
            continue;
        }
        let side = if i < imax { tail_model.left } else { tail_model.right };
        if let Some(fit) = side {
            d2[i] = fit.slope * d1[i];
            d3[i] = fit.slope * fit.slope * d1[i];
        }
    }

    if let Some(i) = d1.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NonmonotoneProfile(i));
    }
    let scale = fp.a2 - fp.a1;
    if let Some(i) = (0..n - 1).find(|&i| u[i + 1] - u[i] < -1e-12 * scale) {
        return Err(Error::NonmonotoneProfile(i));
    }
    if (u[0] - fp.a1).abs() > 1e-4 || (u[n - 1] - fp.a2).abs() > 1e-4 {
        return Err(Error::DomainTooSmall(format!(
            "front has not reached its limits at the boundary (u(-L)-a1={:e}, u(L)-a2={:e})",
            u[0] - fp.a1,
            u[n - 1] - fp.a2
        )));
    }

    let field = |v: Vec<f64>| Field { grid: *grid, values: v };
    Ok(WaveSolution {
        params: *params,
        grid: *grid,
        profile: field(u),
        d1: field(d1),
        d2: field(d2),
        d3: field(d3),
        speed: c,
        fixed_points: fp,
        residual,
        iterations,
        tails: tail_model,
    })
}

impl WaveSolution {
    /// ||-c û_x + û - w*F(û)||_inf with the centered derivative, interior nodes only.
    pub fn centered_residual(&self, margin: usize) -> f64 {
        let n = self.grid.n();
        let plan = ConvPlan::for_grid(&self.grid, self.params.sigma());
        let u = &self.profile.values;
        let fu: Vec<f64> = u.iter().map(|&v| self.params.gain.f(v)).collect();
        let wf = plan.apply_vec(&fu, Extension::Constant);
        let du = derivative(n, self.grid.dx(), 1).apply_vec(u);
        (margin..n - margin)
            .map(|i| (-self.speed * du[i] + u[i] - wf[i]).abs())
            .fold(0.0, f64::max)
    }
}

/// Speed measured by direct time integration from a step between a1 and a2.
pub fn wave_speed_oracle(params: &ModelParams, grid: &GridSpec, horizon: f64) -> Result<f64> {
    wave_speed_oracle_with(params, grid, horizon, 0.01)
}

pub fn wave_speed_oracle_with(params: &ModelParams, grid: &GridSpec, horizon: f64, dt: f64) -> Result<f64> {
    let fp = validate_gain(&params.gain)?;
    let n = grid.n();
    let mut u: Vec<f64> = (0..n)
        .map(|i| if grid.x(i) < 0.0 { fp.a1 } else { fp.a2 })
        .collect();
    let stepper = AmariStepper::new(params, grid, dt, Scheme::Etd2);
    let steps = (horizon / dt).round() as usize;
    let every = ((0.05 / dt).round() as usize).max(1);
    let margin = 5.0 * params.sigma();
    let mut ts = Vec::new();
    let mut xs = Vec::new();
    for k in 0..=steps {
        if k % every == 0 {
            let pos = level_set(grid, &u, fp.a)
                .filter(|p| p.abs() < grid.half_length - margin)
                .ok_or_else(|| Error::DomainTooSmall("level set left the grid".into()))?;
            ts.push(k as f64 * dt);
            xs.push(pos);
        }
        if k < steps {
            stepper.step(&mut u);
        }
    }
    let half = ts.len() / 2;
    Ok(ls_slope(&ts[half..], &xs[half..]))
}

/// Leftmost crossing of `level` by linear interpolation.
pub fn level_set(grid: &GridSpec, u: &[f64], level: f64) -> Option<f64> {
    (0..u.len() - 1)
        .find(|&i| u[i] < level && u[i + 1] >= level)
        .map(|i| grid.x(i) + (level - u[i]) / (u[i + 1] - u[i]) * grid.dx())
}

pub fn ls_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let num: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let den: f64 = t.iter().map(|a| (a - tm) * (a - tm)).sum();
    num / den
}
