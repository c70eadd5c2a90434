//! Lab-frame time stepping of v = u - û(. - ct):
//! dv = (-v + w*(F(û_t + v) - F(û_t))) dt + ε dW.

use serde::{Deserialize, Serialize};

use crate::model::fd::{BandOp, derivative};
use crate::model::interp::Shift;
use crate::model::{ConvPlan, Extension, Field, GridSpec, ModelParams};
use crate::noise::{NoiseModel, RngStream};
use crate::spectral::SpectralData;
use crate::wave::WaveSolution;
use crate::{Error, Result};

/// Exponential integrators for u' = -u + N(u, t).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// N frozen at the left endpoint.
    ExpEuler,
    /// Second-order exponential Runge-Kutta (trapezoidal correction of N).
    #[default]
    Etd2,
}

#[derive(Clone, Copy, Debug)]
pub struct EtdCoeffs {
    pub dt: f64,
    /// e^{-dt}
    pub e: f64,
    /// 1 - e^{-dt}
    pub p1: f64,
    /// (e^{-dt} - 1 + dt) / dt
    pub p2: f64,
}

impl EtdCoeffs {
    pub fn new(dt: f64) -> Self {
        let e = (-dt).exp();
        let p1 = -(-dt).exp_m1();
        EtdCoeffs {
            dt,
            e,
            p1,
            p2: (dt - p1) / dt,
        }
    }
}

/// One exponential step of v' = -v + N(v). Returns the predictor stage.
///
/// `n0` is N at the current state; `n1` evaluates N at the predictor at the
/// end of the step (only called for [`Scheme::Etd2`]).
pub fn etd_step(scheme: Scheme, co: &EtdCoeffs, v: &mut [f64], n0: &[f64], n1: impl FnOnce(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let a: Vec<f64> = v.iter().zip(n0).map(|(x, n)| co.e * x + co.p1 * n).collect();
    match scheme {
        Scheme::ExpEuler => v.copy_from_slice(&a),
        Scheme::Etd2 => {
            let nb = n1(&a);
            for i in 0..v.len() {
                v[i] = a[i] + co.p2 * (nb[i] - n0[i]);
            }
        }
    }
    a
}

/// Deterministic stepper for u_t = -u + w*F(u).
pub struct AmariStepper {
    params: ModelParams,
    plan: ConvPlan,
    co: EtdCoeffs,
    scheme: Scheme,
}

impl AmariStepper {
    pub fn new(params: &ModelParams, grid: &GridSpec, dt: f64, scheme: Scheme) -> Self {
        AmariStepper {
            params: *params,
            plan: ConvPlan::for_grid(grid, params.sigma()),
            co: EtdCoeffs::new(dt),
            scheme,
        }
    }

    fn rhs(&self, u: &[f64]) -> Vec<f64> {
        let fu: Vec<f64> = u.iter().map(|&v| self.params.gain.f(v)).collect();
        self.plan.apply_vec(&fu, Extension::Constant)
    }

    pub fn step(&self, u: &mut [f64]) {
        let n0 = self.rhs(u);
        etd_step(self.scheme, &self.co, u, &n0, |a| self.rhs(a));
    }
}

/// Profile-dependent fields at one time, all translated by ct.
#[derive(Clone, Debug)]
pub struct Frame {
    pub t: f64,
    pub ub: Vec<f64>,
    pub fu: Vec<f64>,
    pub fp: Vec<f64>,
    pub fpp: Vec<f64>,
    pub ux: Vec<f64>,
    pub uxx: Vec<f64>,
    /// Empty when no spectral data is attached.
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
    pub rho: Vec<f64>,
}

/// Shared read-only state for stepping and measuring in the lab frame.
pub struct Lab<'a> {
    pub ws: &'a WaveSolution,
    pub sp: Option<&'a SpectralData>,
    pub plan: ConvPlan,
    pub dop: BandOp,
    pub co: EtdCoeffs,
    pub scheme: Scheme,
}

/// Weighted norms of a perturbation at time t.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l2: f64,
    pub l2_rho: f64,
    pub h1_1plusrho: f64,
}

impl<'a> Lab<'a> {
    pub fn new(ws: &'a WaveSolution, sp: Option<&'a SpectralData>, dt: f64, scheme: Scheme) -> Self {
        let g = ws.grid;
        Lab {
            ws,
            sp,
            plan: ConvPlan::for_grid(&g, ws.params.sigma()),
            dop: derivative(g.n(), g.dx(), 1),
            co: EtdCoeffs::new(dt),
            scheme,
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.ws.grid
    }

    pub fn n(&self) -> usize {
        self.ws.grid.n()
    }

    pub fn dt(&self) -> f64 {
        self.co.dt
    }

    pub fn shifted(&self, f: &[f64], s: f64) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        Shift::new(self.ws.grid.dx(), s).apply(f, &mut out);
        out
    }

    pub fn frame(&self, t: f64) -> Frame {
        let s = self.ws.speed * t;
        let sh = Shift::new(self.ws.grid.dx(), s);
        let n = self.n();
        let apply = |f: &[f64]| {
            let mut out = vec![0.0; n];
            sh.apply(f, &mut out);
            out
        };
        let ub = apply(&self.ws.profile.values);
        let g = self.ws.params.gain;
        let mut fu = vec![0.0; n];
        let mut fp = vec![0.0; n];
        let mut fpp = vec![0.0; n];
        for i in 0..n {
            (fu[i], fp[i], fpp[i]) = g.eval3(ub[i]);
        }
        let (psi, phi, rho) = match self.sp {
            Some(sp) => (apply(&sp.psi.values), apply(&sp.phi.values), apply(&sp.rho.values)),
            None => (Vec::new(), Vec::new(), Vec::new()),
        };
        Frame {
            t,
            ux: apply(&self.ws.d1.values),
            uxx: apply(&self.ws.d2.values),
            ub,
            fu,
            fp,
            fpp,
            psi,
            phi,
            rho,
        }
    }

    pub fn conv(&self, h: &[f64]) -> Vec<f64> {
        self.plan.apply_vec(h, Extension::Constant)
    }

    /// w*(F(û_t + v) - F(û_t)).
    pub fn nonlinear(&self, v: &[f64], fr: &Frame) -> Vec<f64> {
        let g = self.ws.params.gain;
        let h: Vec<f64> = v.iter().zip(&fr.ub).zip(&fr.fu).map(|((x, u), f)| g.f(u + x) - f).collect();
        self.conv(&h)
    }

    /// w*(F'(û_t) v).
    pub fn linear(&self, v: &[f64], fr: &Frame) -> Vec<f64> {
        let h: Vec<f64> = v.iter().zip(&fr.fp).map(|(x, d)| d * x).collect();
        self.conv(&h)
    }

    /// Deterministic part of a step of the full equation from t0 (frame f0) to t1.
    pub fn step_nonlinear(&self, v: &mut [f64], f0: &Frame, f1: &Frame) -> Vec<f64> {
        let n0 = self.nonlinear(v, f0);
        etd_step(self.scheme, &self.co, v, &n0, |a| self.nonlinear(a, f1))
    }

    /// Same scheme applied to the linearized equation.
    pub fn step_linear(&self, v: &mut [f64], f0: &Frame, f1: &Frame) -> Vec<f64> {
        let n0 = self.linear(v, f0);
        etd_step(self.scheme, &self.co, v, &n0, |a| self.linear(a, f1))
    }

    /// Norms with weight ρ_t; needs spectral data.
    pub fn norms(&self, h: &[f64], fr: &Frame) -> Norms {
        let g = self.grid();
        let dh = self.dop.apply_vec(h);
        let l2sq = g.dot(h, h);
        let dsq = g.dot(&dh, &dh);
        let (rsq, rdsq) = if fr.rho.is_empty() {
            (0.0, 0.0)
        } else {
            (g.wdot(h, h, &fr.rho), g.wdot(&dh, &dh, &fr.rho))
        };
        Norms {
            l2: l2sq.sqrt(),
            l2_rho: rsq.sqrt(),
            h1_1plusrho: (l2sq + dsq + rsq + rdsq).sqrt(),
        }
    }
}

/// One step of the stochastic equation: the noise increment is added first,
/// then the deterministic exponential step runs from t to t + dt.
pub fn step_snfe(v: &Field, t: f64, dt: f64, dw: &Field, ws: &WaveSolution, eps: f64) -> Result<Field> {
    let lab = Lab::new(ws, None, dt, Scheme::default());
    let f0 = lab.frame(t);
    let f1 = lab.frame(t + dt);
    let mut x: Vec<f64> = v.values.iter().zip(&dw.values).map(|(a, b)| a + eps * b).collect();
    lab.step_nonlinear(&mut x, &f0, &f1);
    if x.iter().any(|a| !a.is_finite()) {
        return Err(Error::BlowUp(t + dt));
    }
    Ok(Field { grid: v.grid, values: x })
}

/// ‖h‖ in L2, L2(ρ_t), H1(1+ρ_t).
pub fn weighted_norms(h: &Field, t: f64, spectral: &SpectralData, ws: &WaveSolution) -> Norms {
    let lab = Lab::new(ws, Some(spectral), 1.0, Scheme::default());
    let rho = lab.shifted(&spectral.rho.values, spectral.speed * t);
    let fr = Frame {
        t,
        ub: Vec::new(),
        fu: Vec::new(),
        fp: Vec::new(),
        fpp: Vec::new(),
        ux: Vec::new(),
        uxx: Vec::new(),
        psi: Vec::new(),
        phi: Vec::new(),
        rho,
    };
    lab.norms(&h.values, &fr)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub epsilon: f64,
    pub horizon: f64,
    pub dt: f64,
    pub q_exponent: f64,
    pub initial_eta: Field,
    pub record_stride: usize,
    pub scheme: Scheme,
}

impl SimConfig {
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= self.horizon) || !(self.epsilon >= 0.0) {
            return Err(Error::InvalidInput("need 0 < dt <= horizon and epsilon >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.q_exponent) || self.record_stride == 0 {
            return Err(Error::InvalidInput("need q in [0,1) and record_stride >= 1".into()));
        }
        Ok(())
    }

    /// Stopping threshold ε^(1-q).
    pub fn tau_threshold(&self) -> f64 {
        self.epsilon.powf(1.0 - self.q_exponent)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimPath {
    pub seed: u64,
    pub path_index: u64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub v_snapshots: Vec<Field>,
    /// Brownian increments of the noise coordinates, one row per step; the
    /// noise fields are lambda-weighted mode sums of these.
    pub increments: Vec<Vec<f64>>,
    pub tau: f64,
    pub norms: Vec<Norms>,
}

/// Simulates one path from v(0) = ε η.
pub fn run_path(config: &SimConfig, ws: &WaveSolution, spectral: &SpectralData, noise: &NoiseModel, rng: &mut RngStream) -> Result<SimPath> {
    config.validate()?;
    let steps = config.steps();
    let increments: Vec<Vec<f64>> = (0..steps).map(|_| rng.increments(noise.rank(), config.dt)).collect();
    let mut path = run_with_increments(config, ws, spectral, noise, &increments)?;
    path.seed = rng.seed;
    path.path_index = rng.path_index;
    Ok(path)
}

/// As [`run_path`] with prescribed increments (one row per step).
pub fn run_with_increments(config: &SimConfig, ws: &WaveSolution, spectral: &SpectralData, noise: &NoiseModel, increments: &[Vec<f64>]) -> Result<SimPath> {
    config.validate()?;
    let lab = Lab::new(ws, Some(spectral), config.dt, config.scheme);
    let grid = ws.grid;
    let steps = increments.len();
    let thr = config.tau_threshold();
    let mut v: Vec<f64> = config.initial_eta.values.iter().map(|e| config.epsilon * e).collect();
    let mut fr0 = lab.frame(0.0);
    let mut times = Vec::new();
    let mut snaps = Vec::new();
    let mut norms = Vec::new();
    let mut tau = config.horizon;
    let mut triggered = false;
    let mut record = |k: usize, v: &[f64], fr: &Frame| {
        times.push(k as f64 * config.dt);
        snaps.push(Field { grid, values: v.to_vec() });
        norms.push(lab.norms(v, fr));
    };
    record(0, &v, &fr0);
    if config.epsilon > 0.0 && lab.norms(&v, &fr0).h1_1plusrho >= thr {
        tau = 0.0;
        triggered = true;
    }
    for (k, db) in increments.iter().enumerate() {
        let t1 = (k + 1) as f64 * config.dt;
        let fr1 = lab.frame(t1);
        noise.add_field(db, config.epsilon, &mut v);
        lab.step_nonlinear(&mut v, &fr0, &fr1);
        if v.iter().any(|a| !a.is_finite()) {
            return Err(Error::BlowUp(t1));
        }
        if !triggered && config.epsilon > 0.0 && lab.norms(&v, &fr1).h1_1plusrho >= thr {
            tau = t1;
            triggered = true;
        }
        if (k + 1) % config.record_stride == 0 || k + 1 == steps {
            record(k + 1, &v, &fr1);
        }
        fr0 = fr1;
    }
    Ok(SimPath {
        seed: 0,
        path_index: 0,
        dt: config.dt,
        times,
        v_snapshots: snaps,
        increments: increments.to_vec(),
        tau,
        norms,
    })
}
