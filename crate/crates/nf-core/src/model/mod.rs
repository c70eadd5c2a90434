//! Gain function, kernel, grid, and the exponential-kernel convolution.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub mod conv;
pub mod fd;
pub mod interp;
pub mod tails;

pub use conv::{ConvPlan, Extension, conv_exp};

/// Sigmoid gain F(x) = 1/(1+exp(-gamma (x - theta))).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainParams {
    pub gamma: f64,
    pub theta: f64,
}

impl GainParams {
    pub fn f(&self, x: f64) -> f64 {
        1.0 / (1.0 + (-self.gamma * (x - self.theta)).exp())
    }

    pub fn df(&self, x: f64) -> f64 {
        let s = self.f(x);
        self.gamma * s * (1.0 - s)
    }

    pub fn d2f(&self, x: f64) -> f64 {
        let s = self.f(x);
        self.gamma * self.gamma * s * (1.0 - s) * (1.0 - 2.0 * s)
    }

    /// (F, F', F'') at x from one exponential.
    #[inline]
    pub fn eval3(&self, x: f64) -> (f64, f64, f64) {
        let s = self.f(x);
        let d = self.gamma * s * (1.0 - s);
        (s, d, self.gamma * d * (1.0 - 2.0 * s))
    }
}

/// w(x) = exp(-|x|/sigma) / (2 sigma).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub sigma: f64,
}

impl KernelParams {
    pub fn w(&self, x: f64) -> f64 {
        (-x.abs() / self.sigma).exp() / (2.0 * self.sigma)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gain: GainParams,
    pub kernel: KernelParams,
}

impl ModelParams {
    pub fn new(gamma: f64, theta: f64, sigma: f64) -> Self {
        ModelParams {
            gain: GainParams { gamma, theta },
            kernel: KernelParams { sigma },
        }
    }

    pub fn sigma(&self) -> f64 {
        self.kernel.sigma
    }
}

/// Roots a1 < a < a2 of F(x) = x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoints {
    pub a1: f64,
    pub a: f64,
    pub a2: f64,
}

const ROOT_SCAN: usize = 20_000;

/// Locates the three fixed points of F and checks their stability pattern.
pub fn validate_gain(params: &GainParams) -> Result<FixedPoints> {
    if !(params.gamma > 0.0) || !(params.theta > 0.0 && params.theta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "gain needs gamma > 0 and theta in (0,1), got {:?}",
            params
        )));
    }
    let g = |x: f64| params.f(x) - x;
    let mut roots = Vec::new();
    let mut x_prev = 0.0;
    let mut g_prev = g(0.0);
    for j in 1..=ROOT_SCAN {
        let x = j as f64 / ROOT_SCAN as f64;
        let gx = g(x);
        if gx == 0.0 {
            roots.push(x);
        } else if g_prev != 0.0 && g_prev * gx < 0.0 {
            roots.push(bisect(&g, x_prev, x, 1e-13));
        }
        x_prev = x;
        g_prev = gx;
    }
    if roots.len() != 3 {
        return Err(Error::BistabilityViolated(roots.len()));
    }
    let fp = FixedPoints {
        a1: roots[0],
        a: roots[1],
        a2: roots[2],
    };
    let (d1, dm, d2) = (params.df(fp.a1), params.df(fp.a), params.df(fp.a2));
    if !(d1 < 1.0 && d2 < 1.0 && dm > 1.0) {
        return Err(Error::StabilityViolated { d1, dm, d2 });
    }
    Ok(fp)
}

fn bisect(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut glo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm < 0.0) == (glo < 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
        if hi - lo <= tol {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Tail decay exponent: the positive root of c x^3 + sigma x^2 - c x - delta sigma
/// in (sqrt(delta), 1].
pub fn decay_rate(c: f64, sigma: f64, delta: f64) -> Result<f64> {
    if !(c >= 0.0) || !(sigma > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "decay_rate needs c >= 0, sigma > 0, delta in (0,1); got c={c}, sigma={sigma}, delta={delta}"
        )));
    }
    let root = if c == 0.0 {
        delta.sqrt()
    } else {
        let f = |x: f64| ((c * x + sigma) * x - c) * x - delta * sigma;
        bisect(&f, delta.sqrt(), 1.0, 1e-15)
    };
    let residual = cubic_residual(c, sigma, delta, root);
    if residual > 1e-10 * (1.0 + c + sigma) {
        return Err(Error::CubicSolveFailed(residual));
    }
    Ok(root)
}

pub fn cubic_residual(c: f64, sigma: f64, delta: f64, x: f64) -> f64 {
    (c * x * x * x + sigma * x * x - c * x - delta * sigma).abs()
}

/// Linearized tail contraction at the two stable states and the resulting
/// exponential rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRates {
    pub delta1: f64,
    pub delta2: f64,
    pub tilde_delta1: f64,
    pub tilde_delta2: f64,
}

pub fn decay_rates(params: &ModelParams, fp: &FixedPoints, c: f64) -> Result<DecayRates> {
    let delta1 = 1.0 - params.gain.df(fp.a1);
    let delta2 = 1.0 - params.gain.df(fp.a2);
    Ok(DecayRates {
        delta1,
        delta2,
        tilde_delta1: decay_rate(c, params.sigma(), delta1)?,
        tilde_delta2: decay_rate(c, params.sigma(), delta2)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPolicy {
    #[default]
    ConstantExtension,
}

/// Uniform grid on [-L, L].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_length: f64,
    pub n_points: usize,
    pub spacing: f64,
    pub boundary_policy: BoundaryPolicy,
}

impl GridSpec {
    pub fn new(half_length: f64, n_points: usize) -> Result<Self> {
        if !(half_length > 0.0) || n_points < 3 {
            return Err(Error::InvalidInput(format!(
                "grid needs L > 0 and at least 3 points, got L={half_length}, N={n_points}"
            )));
        }
        Ok(GridSpec {
            half_length,
            n_points,
            spacing: 2.0 * half_length / (n_points - 1) as f64,
            boundary_policy: BoundaryPolicy::ConstantExtension,
        })
    }

    pub fn n(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.spacing
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.spacing
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Trapezoidal quadrature weights.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![self.spacing; self.n_points];
        w[0] *= 0.5;
        w[self.n_points - 1] *= 0.5;
        w
    }

    /// Trapezoidal inner product.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        trapz_dot(self.spacing, a, b)
    }

    /// Trapezoidal inner product with weight `w`.
    pub fn wdot(&self, a: &[f64], b: &[f64], w: &[f64]) -> f64 {
        let n = a.len();
        let mut s = 0.5 * (a[0] * b[0] * w[0] + a[n - 1] * b[n - 1] * w[n - 1]);
        for i in 1..n - 1 {
            s += a[i] * b[i] * w[i];
        }
        s * self.spacing
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.dot(a, a).sqrt()
    }

    /// First node with x_i >= x, clamped to the grid.
    pub fn index_at_or_after(&self, x: f64) -> usize {
        let p = ((x + self.half_length) / self.spacing - 1e-9).ceil();
        p.clamp(0.0, (self.n_points - 1) as f64) as usize
    }
}

pub fn trapz_dot(dx: f64, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    debug_assert_eq!(n, b.len());
    let mut s = 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]);
    for i in 1..n - 1 {
        s += a[i] * b[i];
    }
    s * dx
}

/// Grid samples of a function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points {
            return Err(Error::InvalidInput(format!(
                "field has {} values for a {}-point grid",
                values.len(),
                grid.n_points
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite field value at node {i}")));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.n_points],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> f64) -> Self {
        Field {
            grid,
            values: (0..grid.n_points).map(|i| f(grid.x(i))).collect(),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn dot(&self, other: &Field) -> f64 {
        self.grid.dot(&self.values, &other.values)
    }

    pub fn norm(&self) -> f64 {
        self.grid.norm(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
