//! Exponential continuation of bump-shaped positive fields below roundoff.
//!
//! Far in the tails a computed û_x or ψ is dominated by rounding noise (it can
//! even change sign), while the true field decays exponentially. Below
//! `floor * max f` the samples are replaced by a log-linear fit taken just
//! inside that level.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Outermost trusted node; nodes beyond it are extrapolated.
    pub edge: usize,
    pub slope: f64,
    pub intercept: f64,
}

impl TailFit {
    pub fn eval(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x).exp()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub left: Option<TailFit>,
    pub right: Option<TailFit>,
}

/// Least-squares slope and intercept of ln f over the given nodes.
pub fn log_linear_fit(x: &[f64], f: &[f64], idx: impl Iterator<Item = usize>) -> (f64, f64) {
    let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in idx {
        let y = f[i].ln();
        n += 1.0;
        sx += x[i];
        sy += y;
        sxx += x[i] * x[i];
        sxy += x[i] * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope, (sy - slope * sx) / n)
}

/// Returns the regularized field and the fits used. `fit_len` is the width of
/// the fitting window in x units.
pub fn regularize(x: &[f64], f: &[f64], floor: f64, fit_len: f64) -> (Vec<f64>, TailModel) {
    let n = f.len();
    let dx = x[1] - x[0];
    let nfit = ((fit_len / dx).ceil() as usize).max(4);
    let (imax, fmax) = f
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let thr = floor * fmax;
    let mut out = f.to_vec();
    let mut model = TailModel::default();

    if let Some(bad) = (0..imax).rev().find(|&i| !(f[i] > thr)) {
        let edge = bad + 1;
        let end = (edge + nfit).min(imax);
        if end > edge + 2 {
            let (slope, intercept) = log_linear_fit(x, f, edge..end);
            let fit = TailFit { edge, slope, intercept };
            for i in 0..edge {
                out[i] = fit.eval(x[i]);
            }
            model.left = Some(fit);
        }
    }
    if let Some(bad) = (imax + 1..n).find(|&i| !(f[i] > thr)) {
        let edge = bad - 1;
        let start = edge.saturating_sub(nfit).max(imax + 1);
        if edge > start + 2 {
            let (slope, intercept) = log_linear_fit(x, f, start..edge + 1);
            let fit = TailFit { edge, slope, intercept };
            for i in edge + 1..n {
                out[i] = fit.eval(x[i]);
            }
            model.right = Some(fit);
        }
    }
    (out, model)
}
