//! Finite-rank Q-Wiener noise: dW = sum_k lambda_k dB_k e_k with L2-orthonormal e_k.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::fd::derivative;
use crate::model::{Field, GridSpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub rank: usize,
    /// Shortest wavelength scale of the modes.
    pub corr_length: f64,
    /// Width of the Gaussian window.
    pub envelope: f64,
    pub amplitude: f64,
    /// lambda_k = amplitude * 2^(-decay_exponent * k).
    pub decay_exponent: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            rank: 16,
            corr_length: 2.0,
            envelope: 10.0,
            amplitude: 1.0,
            decay_exponent: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub spec: NoiseSpec,
    pub grid: GridSpec,
    pub lambdas: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
    /// sum lambda_k^2 ||e_k||^2 in L2, H1 and H1(1+ρ).
    pub trace_q: f64,
    pub trace_h1: f64,
    pub trace_h1_rho: Option<f64>,
    /// sum lambda_k^2 ||e_k||_ρ^2.
    pub trace_rho: Option<f64>,
}

/// Gaussian-windowed harmonics, orthonormalized by two passes of modified Gram-Schmidt.
pub fn make_noise(spec: &NoiseSpec, grid: &GridSpec, rho: Option<&Field>) -> Result<NoiseModel> {
    if spec.rank < 1 || !(spec.corr_length > 0.0) || !(spec.envelope > 0.0) || !(spec.amplitude >= 0.0) {
        return Err(Error::InvalidInput(format!("bad noise spec {spec:?}")));
    }
    let x = grid.nodes();
    let harmonics = spec.rank / 2;
    let kmax = 1.0 / spec.corr_length;
    let freq = |h: usize| if harmonics == 0 { 0.0 } else { kmax * h as f64 / harmonics as f64 };
    let env: Vec<f64> = x.iter().map(|&xi| (-xi * xi / (2.0 * spec.envelope * spec.envelope)).exp()).collect();
    let mut modes: Vec<Vec<f64>> = Vec::with_capacity(spec.rank);
    for k in 0..spec.rank {
        let h = k.div_ceil(2);
        let f = freq(h);
        let raw: Vec<f64> = x
            .iter()
            .zip(&env)
            .map(|(&xi, &e)| if k % 2 == 0 { e * (f * xi).cos() } else { e * (f * xi).sin() })
            .collect();
        let raw_norm = grid.norm(&raw);
        let mut v = raw;
        for _ in 0..2 {
            for m in &modes {
                let p = grid.dot(&v, m);
                v.iter_mut().zip(m).for_each(|(a, b)| *a -= p * b);
            }
        }
        let nv = grid.norm(&v);
        if !(nv > 1e-8 * raw_norm) {
            return Err(Error::ModeSetDegenerate(k));
        }
        v.iter_mut().for_each(|a| *a /= nv);
        modes.push(v);
    }
    let lambdas: Vec<f64> = (0..spec.rank)
        .map(|k| spec.amplitude * (-(spec.decay_exponent * k as f64) * std::f64::consts::LN_2).exp())
        .collect();
    let d = derivative(grid.n(), grid.dx(), 1);
    let mut trace_q = 0.0;
    let mut trace_h1 = 0.0;
    let mut trace_h1_rho = 0.0;
    let mut trace_rho = 0.0;
    for (l, m) in lambdas.iter().zip(&modes) {
        let l2 = l * l;
        let dm = d.apply_vec(m);
        let a = grid.dot(m, m);
        let b = grid.dot(&dm, &dm);
        trace_q += l2 * a;
        trace_h1 += l2 * (a + b);
        if let Some(r) = rho {
            let ra = grid.wdot(m, m, &r.values);
            let rb = grid.wdot(&dm, &dm, &r.values);
            trace_h1_rho += l2 * (a + b + ra + rb);
            trace_rho += l2 * ra;
        }
    }
    Ok(NoiseModel {
        spec: *spec,
        grid: *grid,
        lambdas,
        modes,
        trace_q,
        trace_h1,
        trace_h1_rho: rho.map(|_| trace_h1_rho),
        trace_rho: rho.map(|_| trace_rho),
    })
}

impl NoiseModel {
    pub fn rank(&self) -> usize {
        self.modes.len()
    }

    /// <g, e_k> for every mode.
    pub fn project(&self, g: &[f64]) -> Vec<f64> {
        self.modes.iter().map(|m| self.grid.dot(g, m)).collect()
    }

    /// Field sum_k lambda_k db_k e_k for Brownian increments db.
    pub fn field_from(&self, db: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n()];
        self.add_field(db, 1.0, &mut out);
        out
    }

    /// out += scale * sum_k lambda_k db_k e_k.
    pub fn add_field(&self, db: &[f64], scale: f64, out: &mut [f64]) {
        for ((l, b), m) in self.lambdas.iter().zip(db).zip(&self.modes) {
            let a = scale * l * b;
            out.iter_mut().zip(m).for_each(|(o, e)| *o += a * e);
        }
    }

    /// <g, dW> given the projections <g, e_k>.
    pub fn pair(&self, proj: &[f64], db: &[f64]) -> f64 {
        self.lambdas.iter().zip(proj).zip(db).map(|((l, p), b)| l * p * b).sum()
    }
}

/// <g, Q g> = sum_k lambda_k^2 <g, e_k>^2.
pub fn pair_quadratic(noise: &NoiseModel, g: &Field) -> f64 {
    noise
        .project(&g.values)
        .iter()
        .zip(&noise.lambdas)
        .map(|(p, l)| l * l * p * p)
        .sum()
}

/// Words of keystream reserved per time step.
const STEP_STRIDE_LOG2: u32 = 16;

/// Independent normal stream per (seed, path). Step n always draws from the same
/// keystream block, so any step can be regenerated in isolation.
#[derive(Clone, Debug)]
pub struct RngStream {
    pub seed: u64,
    pub path_index: u64,
    pub step: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, path_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_index);
        RngStream {
            seed,
            path_index,
            step: 0,
            rng,
        }
    }

    pub fn seek(&mut self, step: u64) {
        self.step = step;
    }

    /// Standard normals for the current step; advances to the next step.
    pub fn normals(&mut self, out: &mut [f64]) {
        self.rng.set_word_pos((self.step as u128) << STEP_STRIDE_LOG2);
        for o in out.iter_mut() {
            *o = StandardNormal.sample(&mut self.rng);
        }
        self.step += 1;
    }

    /// Brownian increments sqrt(dt) * xi for the current step.
    pub fn increments(&mut self, rank: usize, dt: f64) -> Vec<f64> {
        let mut xi = vec![0.0; rank];
        self.normals(&mut xi);
        let s = dt.sqrt();
        xi.iter_mut().for_each(|v| *v *= s);
        xi
    }
}

/// One noise field for the current step of `rng`.
pub fn sample_increment(noise: &NoiseModel, dt: f64, rng: &mut RngStream) -> Field {
    let db = rng.increments(noise.rank(), dt);
    Field {
        grid: noise.grid,
        values: noise.field_from(&db),
    }
}
