//! One driver per acceptance criterion. Each driver returns a typed report whose
//! `summary` holds the pass/fail checks; `persist` writes both to the output dir.

use std::cell::OnceCell;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nf_core::model::{GridSpec, ModelParams};
use nf_core::noise::{NoiseModel, NoiseSpec, make_noise};
use nf_core::spectral::{SpectralData, SpectralOptions, build_spectral};
use nf_core::wave::{WaveSolution, solve_wave};

use crate::io::{Envelope, read_json, write_json};
use crate::{ExperimentConfig, LabError};

pub mod asymptotics;
pub mod checks;
pub mod diffusion;
pub mod expansion;
pub mod hygiene;
pub mod mconv;
pub mod optimality;
pub mod simulate;
pub mod ou;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// "<=", ">=", "<", ">" or "true".
    pub relation: String,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn le(name: &str, value: f64, threshold: f64) -> Self {
        Self::make(name, value, "<=", threshold, value <= threshold)
    }

    pub fn ge(name: &str, value: f64, threshold: f64) -> Self {
        Self::make(name, value, ">=", threshold, value >= threshold)
    }

    pub fn gt(name: &str, value: f64, threshold: f64) -> Self {
        Self::make(name, value, ">", threshold, value > threshold)
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        Self::make(name, if ok { 1.0 } else { 0.0 }, "true", 1.0, ok)
    }

    fn make(name: &str, value: f64, relation: &str, threshold: f64, passed: bool) -> Self {
        Check {
            name: name.to_string(),
            value,
            relation: relation.to_string(),
            threshold,
            passed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionSummary {
    pub criterion: u8,
    pub title: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Measured but not asserted.
    pub notes: Vec<String>,
}

impl CriterionSummary {
    pub fn new(criterion: u8, title: &str, checks: Vec<Check>, notes: Vec<String>) -> Self {
        CriterionSummary {
            criterion,
            title: title.to_string(),
            passed: checks.iter().all(|c| c.passed),
            checks,
            notes,
        }
    }

    pub fn line(&self) -> String {
        let failed: Vec<&str> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        format!(
            "criterion {:>2} {:<28} {}{}",
            self.criterion,
            self.title,
            if self.passed { "PASS" } else { "FAIL" },
            if failed.is_empty() {
                String::new()
            } else {
                format!(" ({})", failed.join(", "))
            }
        )
    }
}

pub trait Report: Serialize {
    const KIND: &'static str;
    fn summary(&self) -> &CriterionSummary;
}

/// Wave and spectral data for one parameter set.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub ws: WaveSolution,
    pub sp: SpectralData,
}

impl Artifacts {
    pub fn build(params: &ModelParams, grid: &GridSpec, tol: f64) -> Result<Self, LabError> {
        let ws = solve_wave(params, grid, tol)?;
        let sp = build_spectral(&ws, &SpectralOptions::default())?;
        Ok(Artifacts { ws, sp })
    }

    pub fn noise(&self, spec: &NoiseSpec) -> Result<NoiseModel, LabError> {
        Ok(make_noise(spec, &self.ws.grid, Some(&self.sp.rho))?)
    }
}

/// Configuration plus lazily built artifacts shared by the drivers.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub hash: String,
    main: OnceCell<Artifacts>,
    symmetric: OnceCell<Artifacts>,
    ou: OnceCell<Artifacts>,
    refined: OnceCell<Artifacts>,
}

/// Threshold giving c = 0 by symmetry.
pub const SYMMETRIC_THETA: f64 = 0.5;

impl Context {
    pub fn new(cfg: ExperimentConfig) -> Self {
        let hash = cfg.hash();
        Context {
            cfg,
            hash,
            main: OnceCell::new(),
            symmetric: OnceCell::new(),
            ou: OnceCell::new(),
            refined: OnceCell::new(),
        }
    }

    pub fn output_dir(&self) -> &Path {
        &self.cfg.output_dir
    }

    fn with_theta(&self, theta: f64) -> ModelParams {
        let m = &self.cfg.model;
        ModelParams::new(m.gamma, theta, m.sigma)
    }

    fn get<'a>(&'a self, cell: &'a OnceCell<Artifacts>, build: impl FnOnce() -> Result<Artifacts, LabError>) -> Result<&'a Artifacts, LabError> {
        if let Some(a) = cell.get() {
            return Ok(a);
        }
        let a = build()?;
        Ok(cell.get_or_init(|| a))
    }

    /// Artifacts for the configured model, reusing wave.json / spectral.json from
    /// the output dir when they were written under the same config hash.
    pub fn main(&self) -> Result<&Artifacts, LabError> {
        self.get(&self.main, || {
            if let Some(a) = self.load_cached() {
                return Ok(a);
            }
            Artifacts::build(&self.cfg.model_params(), &self.cfg.grid_spec()?, self.cfg.wave.tol)
        })
    }

    pub fn symmetric(&self) -> Result<&Artifacts, LabError> {
        if self.cfg.model.theta == SYMMETRIC_THETA {
            return self.main();
        }
        self.get(&self.symmetric, || {
            Artifacts::build(&self.with_theta(SYMMETRIC_THETA), &self.cfg.grid_spec()?, self.cfg.wave.tol)
        })
    }

    pub fn ou(&self) -> Result<&Artifacts, LabError> {
        let theta = self.cfg.ou.theta;
        if theta == self.cfg.model.theta {
            return self.main();
        }
        if theta == SYMMETRIC_THETA {
            return self.symmetric();
        }
        self.get(&self.ou, || Artifacts::build(&self.with_theta(theta), &self.cfg.grid_spec()?, self.cfg.wave.tol))
    }

    /// The configured model on the refined grid.
    pub fn refined(&self) -> Result<&Artifacts, LabError> {
        self.get(&self.refined, || {
            let g = GridSpec::new(self.cfg.grid.half_length, self.cfg.asymptotics.refine_n_points)?;
            Artifacts::build(&self.cfg.model_params(), &g, self.cfg.wave.tol)
        })
    }

    pub fn wave_path(&self) -> PathBuf {
        self.output_dir().join("wave.json")
    }

    pub fn spectral_path(&self) -> PathBuf {
        self.output_dir().join("spectral.json")
    }

    fn load_cached(&self) -> Option<Artifacts> {
        let ws: Envelope<WaveSolution> = read_json(&self.wave_path()).ok()?;
        let sp: Envelope<SpectralData> = read_json(&self.spectral_path()).ok()?;
        (ws.config_hash == self.hash && sp.config_hash == self.hash).then_some(Artifacts { ws: ws.data, sp: sp.data })
    }

    /// Writes wave.json and spectral.json for the configured model.
    pub fn save_artifacts(&self) -> Result<(), LabError> {
        let a = self.main()?;
        write_json(&self.wave_path(), &self.envelope("wave_solution", &a.ws))?;
        write_json(&self.spectral_path(), &self.envelope("spectral_data", &a.sp))
    }

    pub fn envelope<T>(&self, kind: &str, data: T) -> Envelope<T> {
        Envelope::new(kind, &self.hash, self.cfg.seed, data)
    }

    /// Writes the full report and its criterion summary.
    pub fn persist<R: Report>(&self, report: &R) -> Result<(), LabError> {
        let dir = self.output_dir();
        write_json(&dir.join(format!("{}.json", R::KIND)), &self.envelope(R::KIND, report))?;
        let s = report.summary();
        write_json(
            &dir.join(format!("criterion_{:02}.json", s.criterion)),
            &self.envelope("criterion", s),
        )
    }
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 { s[k / 2] } else { 0.5 * (s[k / 2 - 1] + s[k / 2]) }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Least-squares slope of log y against log x over the positive pairs.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip();
    if lx.len() < 2 {
        return f64::NAN;
    }
    nf_core::wave::ls_slope(&lx, &ly)
}

/// Maps `f` over `0..n` on a scoped worker pool, keeping input order. Each index
/// carries its own RNG stream, so the result does not depend on the pool size.
pub fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    use std::sync::Mutex;
    use std::sync::atomic::{AtomicUsize, Ordering};
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n.max(1));
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| {
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let r = f(i);
                    out.lock().unwrap()[i] = Some(r);
                }
            });
        }
    });
    out.into_inner().unwrap().into_iter().map(|r| r.unwrap()).collect()
}

fn persisted<R: Report>(ctx: &Context, report: R) -> Result<CriterionSummary, LabError> {
    ctx.persist(&report)?;
    Ok(report.summary().clone())
}

/// Runs the driver for acceptance criterion `k` (1..=10) and persists its report.
pub fn run_criterion(ctx: &Context, k: u8) -> Result<CriterionSummary, LabError> {
    match k {
        1 => persisted(ctx, checks::exp_wave(ctx)?),
        2 => persisted(ctx, checks::exp_adjoint(ctx)?),
        3 => persisted(ctx, checks::exp_spectral(ctx)?),
        4 => persisted(ctx, expansion::exp_residual_scaling(ctx)?),
        5 => persisted(ctx, diffusion::exp_phase_diffusion(ctx)?),
        6 => persisted(ctx, ou::exp_ou_stationarity(ctx)?),
        7 => persisted(ctx, mconv::exp_m_convergence(ctx)?),
        8 => persisted(ctx, optimality::exp_phase_optimality(ctx)?),
        9 => persisted(ctx, asymptotics::exp_asymptotics(ctx)?),
        10 => persisted(ctx, hygiene::exp_hygiene(ctx)?),
        _ => Err(LabError::Config(format!("no acceptance criterion {k}"))),
    }
}
