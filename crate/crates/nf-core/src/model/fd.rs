//! Finite-difference stencils on the uniform grid.

/// Fornberg's recursion: weights `c[k][j]` for the k-th derivative at `z`
/// from values at nodes `xs[j]`, for k = 0..=m.
pub fn fornberg(z: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Banded difference operator: row i reads `width` consecutive nodes from `starts[i]`.
#[derive(Clone, Debug)]
pub struct BandOp {
    n: usize,
    width: usize,
    starts: Vec<usize>,
    weights: Vec<f64>,
}

impl BandOp {
    /// Centered `points`-node stencil for the `deriv`-th derivative, shifted
    /// one-sided near the boundaries.
    pub fn centered(n: usize, dx: f64, deriv: usize, points: usize) -> Self {
        let half = points / 2;
        Self::build(n, dx, deriv, points, |i| {
            i.saturating_sub(half).min(n - points)
        })
    }

    /// First-derivative stencil on offsets lo..=hi, shifted inward at the boundaries.
    pub fn biased(n: usize, dx: f64, lo: isize, hi: isize) -> Self {
        let width = (hi - lo + 1) as usize;
        Self::build(n, dx, 1, width, |i| {
            (i as isize + lo).clamp(0, (n - width) as isize) as usize
        })
    }

    fn build(n: usize, dx: f64, deriv: usize, width: usize, start: impl Fn(usize) -> usize) -> Self {
        assert!(n >= width, "grid has fewer points than the stencil");
        let scale = dx.powi(deriv as i32);
        let mut starts = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n * width);
        let mut cache: Vec<(isize, Vec<f64>)> = Vec::new();
        for i in 0..n {
            let st = start(i);
            let off = st as isize - i as isize;
            let w = match cache.iter().find(|(o, _)| *o == off) {
                Some((_, w)) => w.clone(),
                None => {
                    let xs: Vec<f64> = (0..width).map(|q| (off + q as isize) as f64).collect();
                    let w: Vec<f64> = fornberg(0.0, &xs, deriv)[deriv].iter().map(|v| v / scale).collect();
                    cache.push((off, w.clone()));
                    w
                }
            };
            starts.push(st);
            weights.extend_from_slice(&w);
        }
        BandOp { n, width, starts, weights }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> (usize, &[f64]) {
        (self.starts[i], &self.weights[i * self.width..(i + 1) * self.width])
    }

    pub fn zero_row(&mut self, i: usize) {
        self.weights[i * self.width..(i + 1) * self.width].fill(0.0);
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let (st, w) = self.row(i);
            let mut s = 0.0;
            for (q, wq) in w.iter().enumerate() {
                s += wq * u[st + q];
            }
            out[i] = s;
        }
    }

    pub fn apply_vec(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply(u, &mut out);
        out
    }

    /// dense += scale * self, with `dense` row-major n x n.
    pub fn add_to_dense(&self, scale: f64, dense: &mut [f64]) {
        for i in 0..self.n {
            let (st, w) = self.row(i);
            for (q, wq) in w.iter().enumerate() {
                dense[i * self.n + st + q] += scale * wq;
            }
        }
    }
}

/// Nine-point centered derivative, the default for profile derivatives and H1 norms.
pub fn derivative(n: usize, dx: f64, deriv: usize) -> BandOp {
    BandOp::centered(n, dx, deriv, 9)
}
