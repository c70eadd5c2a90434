//! Evaluation of grid fields at shifted positions.
//!
//! Lagrange interpolation on eight nodes; indices are clamped to the grid so the
//! field is continued by its boundary values.

use super::GridSpec;

pub const POINTS: usize = 8;
const LEFT: isize = (POINTS as isize) / 2 - 1;

fn lagrange(alpha: f64) -> [f64; POINTS] {
    let mut w = [0.0; POINTS];
    for (q, wq) in w.iter_mut().enumerate() {
        let dq = q as f64 - LEFT as f64;
        let mut p = 1.0;
        for l in 0..POINTS {
            if l != q {
                let dl = l as f64 - LEFT as f64;
                p *= (alpha - dl) / (dq - dl);
            }
        }
        *wq = p;
    }
    w
}

/// Translation operator h -> h(. - s). All nodes share one set of weights.
#[derive(Clone, Copy, Debug)]
pub struct Shift {
    base: isize,
    weights: [f64; POINTS],
}

impl Shift {
    pub fn new(dx: f64, s: f64) -> Self {
        let r = s / dx;
        let k = r.floor();
        let alpha = 1.0 - (r - k);
        Shift {
            base: -(k as isize) - 1 - LEFT,
            weights: lagrange(alpha),
        }
    }

    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        let n = f.len() as isize;
        let lo = -self.base;
        let hi = n - self.base - POINTS as isize;
        for i in 0..n {
            let b = i + self.base;
            let mut s = 0.0;
            if i >= lo && i <= hi {
                let seg = &f[b as usize..b as usize + POINTS];
                for q in 0..POINTS {
                    s += self.weights[q] * seg[q];
                }
            } else {
                for q in 0..POINTS {
                    let j = (b + q as isize).clamp(0, n - 1) as usize;
                    s += self.weights[q] * f[j];
                }
            }
            out[i as usize] = s;
        }
    }
}

/// h(. - s) on the same grid.
pub fn shift(f: &[f64], dx: f64, s: f64) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    Shift::new(dx, s).apply(f, &mut out);
    out
}

/// Interpolation weights for evaluating at x: (first node, weights). Indices may
/// fall outside the grid and must be clamped by the caller.
pub fn point_weights(grid: &GridSpec, x: f64) -> (isize, [f64; POINTS]) {
    let p = (x + grid.half_length) / grid.spacing;
    let k = p.floor();
    (k as isize - LEFT, lagrange(p - k))
}

/// Value at an arbitrary point.
pub fn eval_at(grid: &GridSpec, f: &[f64], x: f64) -> f64 {
    let (st, w) = point_weights(grid, x);
    let n = f.len() as isize;
    (0..POINTS)
        .map(|q| w[q] * f[(st + q as isize).clamp(0, n - 1) as usize])
        .sum()
}
