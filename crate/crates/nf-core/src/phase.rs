//! Phase tracking and the small-noise expansion
//! u = û(. - ct - εC0 - ε²C1) + εv0 + ε²v1 + O(ε³).
//!
//! All coefficients are advanced with the same exponential scheme and the same
//! noise increments as the field itself, so the expansion defects measure the
//! expansion rather than differences between discretizations.

use serde::{Deserialize, Serialize};

use crate::model::Field;
use crate::noise::NoiseModel;
use crate::sim::{Frame, Lab, Scheme, SimPath, etd_step};
use crate::spectral::SpectralData;
use crate::wave::WaveSolution;
use crate::{Error, Result};

/// π_t h = h - <h, ψ_t> / <û_x,t, ψ_t> û_x,t.
pub fn project_orth(h: &Field, t: f64, ws: &WaveSolution, spectral: &SpectralData) -> Field {
    let lab = Lab::new(ws, Some(spectral), 1.0, Scheme::default());
    let fr = lab.frame(t);
    let mut v = h.values.clone();
    project_in_place(&lab, &mut v, &fr);
    Field { grid: h.grid, values: v }
}

fn project_in_place(lab: &Lab, v: &mut [f64], fr: &Frame) -> f64 {
    let g = lab.grid();
    let a = g.dot(v, &fr.psi) / g.dot(&fr.ux, &fr.psi);
    v.iter_mut().zip(&fr.ux).for_each(|(x, u)| *x -= a * u);
    a
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(p, q)| *p += a * q);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    pub times: Vec<f64>,
    pub c_m: Vec<f64>,
    pub big_c_m: Vec<f64>,
    pub relaxation_m: f64,
}

/// dC/dt = -m <u(t) - û(. - ct - C), ψ(. - ct - C)>, classical RK4 on the
/// snapshot times, u linear in time between snapshots.
pub fn track_phase_m(path: &SimPath, m: f64, ws: &WaveSolution, spectral: &SpectralData, c_init: f64) -> Result<PhaseTrace> {
    let n_snap = path.times.len();
    if n_snap < 2 {
        return Err(Error::InvalidInput("phase tracking needs at least two snapshots".into()));
    }
    let h = path.times[1] - path.times[0];
    if m * h > 0.5 {
        return Err(Error::PhaseOdeUnstable(m * h));
    }
    let lab = Lab::new(ws, Some(spectral), h, Scheme::default());
    let g = ws.grid;
    let c = ws.speed;
    let u_at = |k: usize, theta: f64| -> Vec<f64> {
        let t = path.times[k] + theta * h;
        let ub = lab.shifted(&ws.profile.values, c * t);
        let v0 = &path.v_snapshots[k].values;
        let v1 = &path.v_snapshots[(k + 1).min(n_snap - 1)].values;
        (0..g.n()).map(|i| ub[i] + (1.0 - theta) * v0[i] + theta * v1[i]).collect()
    };
    let rate = |u: &[f64], t: f64, big_c: f64| -> f64 {
        let s = c * t + big_c;
        let uref = lab.shifted(&ws.profile.values, s);
        let psi = lab.shifted(&spectral.psi.values, s);
        let d: Vec<f64> = u.iter().zip(&uref).map(|(a, b)| a - b).collect();
        -m * g.dot(&d, &psi)
    };
    let mut big_c = c_init;
    let mut times = Vec::with_capacity(n_snap);
    let mut cs = Vec::with_capacity(n_snap);
    let mut bigs = Vec::with_capacity(n_snap);
    for k in 0..n_snap {
        let t = path.times[k];
        let u0 = u_at(k, 0.0);
        let k1 = rate(&u0, t, big_c);
        times.push(t);
        cs.push(k1);
        bigs.push(big_c);
        if k + 1 == n_snap {
            break;
        }
        let um = u_at(k, 0.5);
        let u1 = u_at(k, 1.0);
        let k2 = rate(&um, t + 0.5 * h, big_c + 0.5 * h * k1);
        let k3 = rate(&um, t + 0.5 * h, big_c + 0.5 * h * k2);
        let k4 = rate(&u1, t + h, big_c + h * k3);
        big_c += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(PhaseTrace {
        times,
        c_m: cs,
        big_c_m: bigs,
        relaxation_m: m,
    })
}

/// <ψ(. - c t_k), e_j> for every step k and mode j.
#[derive(Clone, Debug)]
pub struct PairingCache {
    pub dt: f64,
    pub proj: Vec<Vec<f64>>,
}

impl PairingCache {
    pub fn new(ws: &WaveSolution, spectral: &SpectralData, noise: &NoiseModel, dt: f64, steps: usize) -> Self {
        let lab = Lab::new(ws, Some(spectral), dt, Scheme::default());
        let proj = (0..steps)
            .map(|k| noise.project(&lab.shifted(&spectral.psi.values, ws.speed * k as f64 * dt)))
            .collect();
        PairingCache { dt, proj }
    }

    /// Itô quadrature sum_{k<n} dt <ψ_k, Q ψ_k> for n = 0..=steps.
    pub fn variance_curve(&self, noise: &NoiseModel) -> Vec<f64> {
        let mut out = vec![0.0];
        let mut acc = 0.0;
        for p in &self.proj {
            acc += self.dt * p.iter().zip(&noise.lambdas).map(|(a, l)| l * l * a * a).sum::<f64>();
            out.push(acc);
        }
        out
    }

    /// C0(t_n) for n = 0..=steps from the increments of one path.
    pub fn c0_path(&self, noise: &NoiseModel, c0_initial: f64, increments: &[Vec<f64>]) -> Vec<f64> {
        let mut out = Vec::with_capacity(increments.len() + 1);
        let mut c0 = c0_initial;
        out.push(c0);
        for (p, db) in self.proj.iter().zip(increments) {
            c0 -= noise.pair(p, db);
            out.push(c0);
        }
        out
    }
}

/// C0(t_n) = -<η, ψ> - sum_{k<n} <ψ(. - c t_k), dW_k>, every step.
pub fn compute_c0(path: &SimPath, ws: &WaveSolution, spectral: &SpectralData, noise: &NoiseModel, eta: &Field) -> Vec<f64> {
    let cache = PairingCache::new(ws, spectral, noise, path.dt, path.increments.len());
    cache.c0_path(noise, -eta.dot(&spectral.psi), &path.increments)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionOptions {
    pub epsilon: f64,
    pub horizon: f64,
    pub dt: f64,
    pub q_exponent: f64,
    pub record_stride: usize,
    pub scheme: Scheme,
    /// Simulate u itself and measure the expansion defects.
    pub full_field: bool,
    /// Track C1 and v1.
    pub second_order: bool,
    /// Finite relaxation rates m to run alongside the limits.
    pub m_ladder: Vec<f64>,
    /// Stop the path at the stopping time.
    pub stop_at_tau: bool,
    /// Steps at which full fields are kept.
    pub keep_steps: Vec<usize>,
}

impl ExpansionOptions {
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MRecord {
    pub m: f64,
    pub c0: f64,
    pub c1: f64,
    /// ‖v^m_0 - v_0‖ and ‖v^m_1 - v_1‖ in L2(ρ_t).
    pub dv0_rho: f64,
    pub dv1_rho: f64,
    /// ‖v^m_0 - v_0 - (C^m_0 - C_0) û_x,t‖ / ‖v_0‖ in L2.
    pub consistency: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub c0: f64,
    pub c1: f64,
    pub v_h1: f64,
    pub v0_rho: f64,
    pub v0_l2: f64,
    pub v1_rho: f64,
    /// <v1, ψ_t> and C0 <v0, ψ_x,t>.
    pub identity_lhs: f64,
    pub identity_rhs: f64,
    /// ‖u - û(. - ct - εC0) - εv0‖ and ‖u - û(. - ct - εC0 - ε²C1) - εv0 - ε²v1‖ in H1(1+ρ_t).
    pub defect1: f64,
    pub defect2: f64,
    pub m: Vec<MRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSet {
    pub step: usize,
    pub t: f64,
    pub c0: f64,
    pub c1: f64,
    pub v: Vec<f64>,
    pub v0: Vec<f64>,
    pub v1: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRun {
    pub epsilon: f64,
    pub tau: f64,
    pub stopped_early: bool,
    /// max over steps of |<v0, ψ_t>| / (‖v0‖ ‖ψ_t‖).
    pub orth_max: f64,
    pub records: Vec<Record>,
    pub fields: Vec<FieldSet>,
}

impl ExpansionRun {
    pub fn reached_horizon(&self) -> bool {
        !self.stopped_early
    }
}

/// One finite-m companion: C^m_0 as exact impulse-driven relaxation, C^m_1 from
/// its integrated representation with exact exponential filters, v^m_0 and
/// v^m_1 stepped like v0 with the phase forcing added as increments.
struct MState {
    m: f64,
    d: f64,
    vm0: Vec<f64>,
    vm1: Vec<f64>,
    cm1: f64,
    int_g: f64,
    flt_g: f64,
    flt_h: f64,
    flt_q: f64,
    decay: f64,
    alpha: f64,
    beta: f64,
}

impl MState {
    fn new(m: f64, dt: f64, d0: f64, eta: &[f64]) -> Self {
        let q = m * dt;
        let decay = (-q).exp();
        let beta = (q + (-q).exp_m1()) / q;
        MState {
            m,
            d: d0,
            vm0: eta.to_vec(),
            vm1: vec![0.0; eta.len()],
            cm1: 0.0,
            int_g: 0.0,
            flt_g: 0.0,
            flt_h: 0.0,
            flt_q: 0.0,
            decay,
            alpha: -(-q).exp_m1() - beta,
            beta,
        }
    }

    fn filter(&self, e: f64, left: f64, right: f64) -> f64 {
        self.decay * e + self.alpha * left + self.beta * right
    }
}

/// <F''_t (½ v² - C û_x,t v), φ_t> = <w*(...), ψ_t>.
fn g_integrand(lab: &Lab, v: &[f64], big_c: f64, fr: &Frame) -> f64 {
    let h: Vec<f64> = (0..v.len())
        .map(|i| fr.fpp[i] * (0.5 * v[i] * v[i] - big_c * fr.ux[i] * v[i]) * fr.phi[i])
        .collect();
    let ones = vec![1.0; v.len()];
    lab.grid().dot(&h, &ones)
}

/// w*(F'_t y + F''_t s) for a given source s.
fn forced_linear(lab: &Lab, y: &[f64], src: &[f64], fr: &Frame) -> Vec<f64> {
    let h: Vec<f64> = (0..y.len()).map(|i| fr.fp[i] * y[i] + fr.fpp[i] * src[i]).collect();
    lab.conv(&h)
}

/// Advances u, the expansion coefficients and the finite-m companions along one
/// noise path. `increments(k)` returns the Brownian increments of step k.
pub fn run_expansion(lab: &Lab, noise: &NoiseModel, eta: &[f64], opts: &ExpansionOptions, mut increments: impl FnMut(usize) -> Vec<f64>) -> Result<ExpansionRun> {
    let sp = lab
        .sp
        .ok_or_else(|| Error::InvalidInput("expansion needs spectral data".into()))?;
    let ws = lab.ws;
    let g = lab.grid();
    let n = g.n();
    let dt = lab.dt();
    let eps = opts.epsilon;
    let steps = opts.steps();
    let thr = eps.powf(1.0 - opts.q_exponent);
    let ux_psix = g.dot(&ws.d1.values, &sp.psi_x.values);
    let psi_norm = g.norm(&sp.psi.values);

    let mut fr0 = lab.frame(0.0);
    let mut v: Vec<f64> = eta.iter().map(|e| eps * e).collect();
    let mut v0 = eta.to_vec();
    let mut c0 = -g.dot(eta, &fr0.psi);
    project_in_place(lab, &mut v0, &fr0);
    let mut b = vec![0.0; n];
    let mut int_g = 0.0;
    let mut ms: Vec<MState> = opts.m_ladder.iter().map(|&m| MState::new(m, dt, -c0, eta)).collect();

    let mut run = ExpansionRun {
        epsilon: eps,
        tau: opts.horizon,
        stopped_early: false,
        orth_max: 0.0,
        records: Vec::new(),
        fields: Vec::new(),
    };
    let mut triggered = false;

    let observe = |k: usize, fr: &Frame, v: &[f64], v0: &[f64], b: &[f64], c0: f64, int_g: f64, ms: &[MState], run: &mut ExpansionRun| {
        let t = k as f64 * dt;
        let record_now = k.is_multiple_of(opts.record_stride) || k == steps;
        let keep = opts.keep_steps.contains(&k);
        if !record_now && !keep {
            return;
        }
        let psix = lab.shifted(&sp.psi_x.values, ws.speed * t);
        let v0_psix = g.dot(v0, &psix);
        let (c1, v1) = if opts.second_order {
            let c1 = -int_g + c0 * v0_psix - 0.5 * c0 * c0 * ux_psix;
            let v1: Vec<f64> = (0..n)
                .map(|i| b[i] + c1 * fr.ux[i] - 0.5 * c0 * c0 * fr.uxx[i])
                .collect();
            (c1, v1)
        } else {
            (0.0, Vec::new())
        };
        let mut rec = Record {
            t,
            c0,
            c1,
            ..Default::default()
        };
        let n0 = lab.norms(v0, fr);
        rec.v0_rho = n0.l2_rho;
        rec.v0_l2 = n0.l2;
        if opts.second_order {
            rec.v1_rho = lab.norms(&v1, fr).l2_rho;
            rec.identity_lhs = g.dot(&v1, &fr.psi);
            rec.identity_rhs = c0 * v0_psix;
        }
        if opts.full_field {
            rec.v_h1 = lab.norms(v, fr).h1_1plusrho;
            let ref1 = lab.shifted(&ws.profile.values, ws.speed * t + eps * c0);
            let r1: Vec<f64> = (0..n).map(|i| fr.ub[i] - ref1[i] + v[i] - eps * v0[i]).collect();
            rec.defect1 = lab.norms(&r1, fr).h1_1plusrho;
            if opts.second_order {
                let ref2 = lab.shifted(&ws.profile.values, ws.speed * t + eps * c0 + eps * eps * c1);
                let r2: Vec<f64> = (0..n)
                    .map(|i| fr.ub[i] - ref2[i] + v[i] - eps * v0[i] - eps * eps * v1[i])
                    .collect();
                rec.defect2 = lab.norms(&r2, fr).h1_1plusrho;
            }
        }
        for st in ms {
            let cm0 = c0 + st.d;
            let cm1 = st.cm1;
            let dv0: Vec<f64> = (0..n).map(|i| st.vm0[i] - v0[i]).collect();
            let resid: Vec<f64> = (0..n).map(|i| dv0[i] - st.d * fr.ux[i]).collect();
            let mut mr = MRecord {
                m: st.m,
                c0: cm0,
                c1: cm1,
                dv0_rho: lab.norms(&dv0, fr).l2_rho,
                consistency: g.norm(&resid) / g.norm(v0).max(f64::MIN_POSITIVE),
                ..Default::default()
            };
            if opts.second_order {
                let dv1: Vec<f64> = (0..n).map(|i| st.vm1[i] - v1[i]).collect();
                mr.dv1_rho = lab.norms(&dv1, fr).l2_rho;
            }
            rec.m.push(mr);
        }
        if keep {
            run.fields.push(FieldSet {
                step: k,
                t,
                c0,
                c1,
                v: v.to_vec(),
                v0: v0.to_vec(),
                v1: v1.clone(),
            });
        }
        if record_now {
            run.records.push(rec);
        }
    };

    observe(0, &fr0, &v, &v0, &b, c0, int_g, &ms, &mut run);
    if opts.full_field && eps > 0.0 && lab.norms(&v, &fr0).h1_1plusrho >= thr {
        run.tau = 0.0;
        triggered = true;
    }

    for k in 0..steps {
        if triggered && opts.stop_at_tau {
            run.stopped_early = true;
            break;
        }
        let t1 = (k + 1) as f64 * dt;
        let fr1 = lab.frame(t1);
        let db = increments(k);
        let dw = noise.field_from(&db);
        let pn = g.dot(&fr0.psi, &dw);
        let c0_new = c0 - pn;

        if opts.full_field {
            axpy(&mut v, eps, &dw);
            lab.step_nonlinear(&mut v, &fr0, &fr1);
            if v.iter().any(|a| !a.is_finite()) {
                return Err(Error::BlowUp(t1));
            }
        }

        // v0: projected noise, linear step, re-projection.
        let mut v0s = v0.clone();
        axpy(&mut v0s, 1.0, &dw);
        project_in_place(lab, &mut v0s, &fr0);
        let mut v0n = v0s.clone();
        let a0 = lab.step_linear(&mut v0n, &fr0, &fr1);
        project_in_place(lab, &mut v0n, &fr1);
        let orth = g.dot(&v0n, &fr1.psi).abs() / (g.norm(&v0n) * psi_norm).max(f64::MIN_POSITIVE);
        run.orth_max = run.orth_max.max(orth);

        if opts.second_order {
            let g0 = g_integrand(lab, &v0s, c0_new, &fr0);
            let g1 = g_integrand(lab, &v0n, c0_new, &fr1);
            int_g += 0.5 * dt * (g0 + g1);
            // b solves db = L_t b + ½ w*(F''_t z²), z = v0 - C0 û_x,t.
            let src0: Vec<f64> = (0..n)
                .map(|i| {
                    let z = v0s[i] - c0_new * fr0.ux[i];
                    0.5 * z * z
                })
                .collect();
            let src1: Vec<f64> = (0..n)
                .map(|i| {
                    let z = a0[i] - c0_new * fr1.ux[i];
                    0.5 * z * z
                })
                .collect();
            let nb0 = forced_linear(lab, &b, &src0, &fr0);
            etd_step(lab.scheme, &lab.co, &mut b, &nb0, |ab| forced_linear(lab, ab, &src1, &fr1));
        }

        for st in ms.iter_mut() {
            let cm0_old = c0 + st.d;
            let d_new = (st.d + pn) * st.decay;
            let cm0_new = c0_new + d_new;
            let mut vs = st.vm0.clone();
            axpy(&mut vs, 1.0, &dw);
            let mut vn = vs.clone();
            let am = lab.step_linear(&mut vn, &fr0, &fr1);
            axpy(&mut vn, cm0_new - cm0_old, &fr1.ux);

            if opts.second_order {
                let psix0 = lab.shifted(&sp.psi_x.values, ws.speed * fr0.t);
                let psix1 = lab.shifted(&sp.psi_x.values, ws.speed * t1);
                let gl = g_integrand(lab, &vs, cm0_old, &fr0);
                let gr = g_integrand(lab, &vn, cm0_new, &fr1);
                let hl = cm0_old * g.dot(&vs, &psix0);
                let hr = cm0_new * g.dot(&vn, &psix1);
                st.int_g += 0.5 * dt * (gl + gr);
                st.flt_g = st.filter(st.flt_g, gl, gr);
                st.flt_h = st.filter(st.flt_h, hl, hr);
                st.flt_q = st.filter(st.flt_q, cm0_old * cm0_old, cm0_new * cm0_new);
                let cm1_new = -(st.int_g - st.flt_g / st.m) + st.flt_h - 0.5 * ux_psix * st.flt_q;

                let src0: Vec<f64> = (0..n)
                    .map(|i| 0.5 * vs[i] * vs[i] - cm0_old * fr0.ux[i] * vs[i])
                    .collect();
                let src1: Vec<f64> = (0..n)
                    .map(|i| {
                        let y = am[i] + (cm0_new - cm0_old) * fr1.ux[i];
                        0.5 * y * y - cm0_new * fr1.ux[i] * y
                    })
                    .collect();
                let n0 = forced_linear(lab, &st.vm1, &src0, &fr0);
                etd_step(lab.scheme, &lab.co, &mut st.vm1, &n0, |a| forced_linear(lab, a, &src1, &fr1));
                let dq = 0.5 * (cm0_new * cm0_new - cm0_old * cm0_old);
                let dc1 = cm1_new - st.cm1;
                for i in 0..n {
                    st.vm1[i] += dc1 * fr1.ux[i] - dq * fr1.uxx[i];
                }
                st.cm1 = cm1_new;
            }
            st.vm0 = vn;
            st.d = d_new;
        }

        v0 = v0n;
        c0 = c0_new;
        if opts.full_field && !triggered && eps > 0.0 && lab.norms(&v, &fr1).h1_1plusrho >= thr {
            run.tau = t1;
            triggered = true;
        }
        observe(k + 1, &fr1, &v, &v0, &b, c0, int_g, &ms, &mut run);
        fr0 = fr1;
    }
    Ok(run)
}

/// C0, C1, v0, v1 along a simulated path, with fields at the path's snapshot times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCoefficients {
    pub times: Vec<f64>,
    pub c0: Vec<f64>,
    pub c1: Vec<f64>,
    pub v0_snapshots: Vec<Field>,
    pub v1_snapshots: Vec<Field>,
}

/// Replays the increments of `path` through the expansion recursions.
pub fn expansion_coefficients(path: &SimPath, ws: &WaveSolution, spectral: &SpectralData, noise: &NoiseModel, eta: &Field, scheme: Scheme) -> Result<ExpansionCoefficients> {
    let lab = Lab::new(ws, Some(spectral), path.dt, scheme);
    let steps = path.increments.len();
    let keep: Vec<usize> = path.times.iter().map(|t| (t / path.dt).round() as usize).collect();
    let opts = ExpansionOptions {
        epsilon: 0.0,
        horizon: steps as f64 * path.dt,
        dt: path.dt,
        q_exponent: 0.0,
        record_stride: steps.max(1),
        scheme,
        full_field: false,
        second_order: true,
        m_ladder: Vec::new(),
        stop_at_tau: false,
        keep_steps: keep,
    };
    let run = run_expansion(&lab, noise, &eta.values, &opts, |k| path.increments[k].clone())?;
    let grid = ws.grid;
    Ok(ExpansionCoefficients {
        times: run.fields.iter().map(|f| f.t).collect(),
        c0: run.fields.iter().map(|f| f.c0).collect(),
        c1: run.fields.iter().map(|f| f.c1).collect(),
        v0_snapshots: run.fields.iter().map(|f| Field { grid, values: f.v0.clone() }).collect(),
        v1_snapshots: run.fields.iter().map(|f| Field { grid, values: f.v1.clone() }).collect(),
    })
}

/// v0 at the snapshot times of `path`.
pub fn evolve_v0(path: &SimPath, ws: &WaveSolution, spectral: &SpectralData, noise: &NoiseModel, eta: &Field) -> Result<Vec<Field>> {
    Ok(expansion_coefficients(path, ws, spectral, noise, eta, Scheme::default())?.v0_snapshots)
}

/// C1 at the snapshot times of `path`.
pub fn compute_c1(path: &SimPath, ws: &WaveSolution, spectral: &SpectralData, noise: &NoiseModel, eta: &Field) -> Result<Vec<f64>> {
    Ok(expansion_coefficients(path, ws, spectral, noise, eta, Scheme::default())?.c1)
}

/// v1 at the snapshot times of `path`.
pub fn evolve_v1(path: &SimPath, ws: &WaveSolution, spectral: &SpectralData, noise: &NoiseModel, eta: &Field) -> Result<Vec<Field>> {
    Ok(expansion_coefficients(path, ws, spectral, noise, eta, Scheme::default())?.v1_snapshots)
}

/// ½ ‖u - û(. - s)‖² with weight `weight`.
pub fn tracking_functional(lab: &Lab, u: &[f64], s: f64, weight: &[f64]) -> f64 {
    let uref = lab.shifted(&lab.ws.profile.values, s);
    let d: Vec<f64> = u.iter().zip(&uref).map(|(a, b)| a - b).collect();
    0.5 * lab.grid().wdot(&d, &d, weight)
}
