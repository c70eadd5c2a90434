//! Linear-time convolution with the exponential kernel.
//!
//! w*h splits into a causal and an anticausal part, each a first-order recursion
//! I_i = E I_{i-1} + (integral over one cell). The cell integral uses the exact
//! exponential moments of a cubic interpolant of h, so the only discretization
//! error is the interpolation error of h.

use super::{Field, GridSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extension {
    /// h continued by its boundary values.
    Constant,
    /// h taken as zero outside the grid.
    Zero,
}

/// r * integral_0^1 s^k e^{-r s} ds, k = 0..3.
fn moments(r: f64) -> [f64; 4] {
    let mut mu = [0.0; 4];
    if r <= 2.0 {
        for (k, m) in mu.iter_mut().enumerate() {
            let mut term = 1.0;
            let mut sum = 0.0;
            for n in 0..200 {
                let t = term / (n + k + 1) as f64;
                sum += t;
                if t.abs() < 1e-18 * sum.abs() {
                    break;
                }
                term *= -r / (n + 1) as f64;
            }
            *m = r * sum;
        }
    } else {
        let e = (-r).exp();
        let mut j = (1.0 - e) / r;
        mu[0] = r * j;
        for (k, m) in mu.iter_mut().enumerate().skip(1) {
            j = (k as f64 * j - e) / r;
            *m = r * j;
        }
    }
    mu
}

/// Weights of the four nodes at local positions `s` for (1/2) r int_0^1 e^{-rs} p(s) ds,
/// p the cubic through the nodes.
fn cell_weights(s: [f64; 4], mu: &[f64; 4]) -> [f64; 4] {
    let mut w = [0.0; 4];
    for j in 0..4 {
        let mut poly = [1.0, 0.0, 0.0, 0.0];
        let mut denom = 1.0;
        for l in 0..4 {
            if l == j {
                continue;
            }
            for k in (1..4).rev() {
                poly[k] = poly[k - 1] - s[l] * poly[k];
            }
            poly[0] *= -s[l];
            denom *= s[j] - s[l];
        }
        w[j] = 0.5 * (0..4).map(|k| poly[k] * mu[k]).sum::<f64>() / denom;
    }
    w
}

/// Precomputed recursion coefficients for one grid and kernel width.
#[derive(Clone, Debug)]
pub struct ConvPlan {
    n: usize,
    decay: f64,
    causal: [[f64; 4]; 3],
    anti: [[f64; 4]; 3],
}

impl ConvPlan {
    pub fn new(n: usize, dx: f64, sigma: f64) -> Self {
        assert!(n >= 5, "exponential convolution needs at least 5 grid points");
        let r = dx / sigma;
        let mu = moments(r);
        ConvPlan {
            n,
            decay: (-r).exp(),
            causal: [
                cell_weights([1.0, 0.0, -1.0, -2.0], &mu),
                cell_weights([2.0, 1.0, 0.0, -1.0], &mu),
                cell_weights([3.0, 2.0, 1.0, 0.0], &mu),
            ],
            anti: [
                cell_weights([0.0, 1.0, 2.0, 3.0], &mu),
                cell_weights([-1.0, 0.0, 1.0, 2.0], &mu),
                cell_weights([-2.0, -1.0, 0.0, 1.0], &mu),
            ],
        }
    }

    pub fn for_grid(grid: &GridSpec, sigma: f64) -> Self {
        Self::new(grid.n_points, grid.spacing, sigma)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn dot4(w: &[f64; 4], h: &[f64]) -> f64 {
        w[0] * h[0] + w[1] * h[1] + w[2] * h[2] + w[3] * h[3]
    }

    /// out = w * h.
    pub fn apply(&self, h: &[f64], out: &mut [f64], ext: Extension) {
        let n = self.n;
        assert!(h.len() == n && out.len() == n);
        let e = self.decay;
        let (head, tail) = match ext {
            Extension::Constant => (0.5 * h[0], 0.5 * h[n - 1]),
            Extension::Zero => (0.0, 0.0),
        };

        let mut acc = head;
        out[0] = acc;
        acc = e * acc + Self::dot4(&self.causal[0], &h[0..4]);
        out[1] = acc;
        for i in 2..n - 1 {
            acc = e * acc + Self::dot4(&self.causal[1], &h[i - 2..i + 2]);
            out[i] = acc;
        }
        acc = e * acc + Self::dot4(&self.causal[2], &h[n - 4..n]);
        out[n - 1] = acc;

        let mut acc = tail;
        out[n - 1] += acc;
        acc = e * acc + Self::dot4(&self.anti[2], &h[n - 4..n]);
        out[n - 2] += acc;
        for i in (1..n - 2).rev() {
            acc = e * acc + Self::dot4(&self.anti[1], &h[i - 1..i + 3]);
            out[i] += acc;
        }
        acc = e * acc + Self::dot4(&self.anti[0], &h[0..4]);
        out[0] += acc;
    }

    pub fn apply_vec(&self, h: &[f64], ext: Extension) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply(h, &mut out, ext);
        out
    }

    /// The operator as a dense row-major n x n matrix.
    pub fn matrix(&self, ext: Extension) -> Vec<f64> {
        let n = self.n;
        let mut m = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col, ext);
            e[j] = 0.0;
            for i in 0..n {
                m[i * n + j] = col[i];
            }
        }
        m
    }
}

/// w*h with constant extension beyond the grid.
pub fn conv_exp(h: &Field, sigma: f64) -> Field {
    let plan = ConvPlan::for_grid(&h.grid, sigma);
    Field {
        grid: h.grid,
        values: plan.apply_vec(&h.values, Extension::Constant),
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; m];
    let mut ws = vec![0.0; m];
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (mut q0, mut q1) = (1.0, x);
                for k in 2..=m {
                    let q2 = ((2 * k - 1) as f64 * x * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let dq = m as f64 * (x * q1 - q0) / (x * x - 1.0);
                ws[i] = 2.0 / ((1.0 - x * x) * dq * dq);
                break;
            }
        }
        xs[i] = x;
    }
    (xs, ws)
}

/// O(N²) reference for [`ConvPlan::apply`]: the same piecewise-cubic reading of h
/// integrated cell by cell against w with 12-point Gauss-Legendre, plus the
/// closed-form contribution of the extension beyond the grid.
pub fn reference_quadrature(h: &[f64], dx: f64, sigma: f64, ext: Extension) -> Vec<f64> {
    let n = h.len();
    assert!(n >= 4);
    let (gx, gw) = gauss_legendre(12);
    let lagrange = |nodes: [usize; 4], y: f64| -> f64 {
        let mut s = 0.0;
        for &j in &nodes {
            let mut l = 1.0;
            for &k in &nodes {
                if k != j {
                    l *= (y - k as f64) / (j as f64 - k as f64);
                }
            }
            s += l * h[j];
        }
        s
    };
    let cells: Vec<[usize; 4]> = (1..n)
        .map(|c| {
            let lo = (c as isize - 2).clamp(0, n as isize - 4) as usize;
            [lo, lo + 1, lo + 2, lo + 3]
        })
        .collect();
    // Samples of the interpolant, in units of dx, shared by all outputs.
    let samples: Vec<Vec<(f64, f64)>> = cells
        .iter()
        .enumerate()
        .map(|(ci, nodes)| {
            let a = ci as f64;
            gx.iter()
                .zip(&gw)
                .map(|(&g, &w)| {
                    let y = a + 0.5 * (g + 1.0);
                    (y, 0.5 * w * lagrange(*nodes, y))
                })
                .collect()
        })
        .collect();
    let (head, tail) = match ext {
        Extension::Constant => (h[0], h[n - 1]),
        Extension::Zero => (0.0, 0.0),
    };
    let r = dx / sigma;
    (0..n)
        .map(|i| {
            let x = i as f64;
            let mut s = 0.0;
            for cell in &samples {
                for &(y, wf) in cell {
                    s += wf * (-(x - y).abs() * r).exp();
                }
            }
            0.5 * r * s + 0.5 * head * (-x * r).exp() + 0.5 * tail * (-((n - 1) as f64 - x) * r).exp()
        })
        .collect()
}
