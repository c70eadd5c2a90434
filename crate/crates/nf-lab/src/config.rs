use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nf_core::model::{Field, GridSpec, ModelParams};
use nf_core::noise::NoiseSpec;
use nf_core::sim::Scheme;

use crate::LabError;

pub const DEFAULT_TOML: &str = include_str!("default.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub wave: WaveConfig,
    pub noise: NoiseSpec,
    pub sim: SimSection,
    pub expansion: ExpansionSection,
    pub diffusion: DiffusionSection,
    pub ou: OuSection,
    pub m_convergence: MConvergenceSection,
    pub optimality: OptimalitySection,
    pub asymptotics: AsymptoticsSection,
    pub hygiene: HygieneSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub gamma: f64,
    pub theta: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_length: f64,
    pub n_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveConfig {
    pub tol: f64,
    pub oracle_horizon: f64,
    pub oracle_dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub epsilon: f64,
    pub horizon: f64,
    pub dt: f64,
    pub q_exponent: f64,
    pub record_stride: usize,
    pub scheme: Scheme,
    /// η = eta_amplitude * exp(-x²/eta_width²).
    pub eta_amplitude: f64,
    pub eta_width: f64,
    pub n_paths: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionSection {
    pub epsilon_ladder: Vec<f64>,
    pub n_paths: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSection {
    pub n_paths: usize,
    /// Fractions of the horizon.
    pub checkpoints: Vec<f64>,
    /// Envelope of the near-translation-invariant comparison run.
    pub wide_envelope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuSection {
    pub theta: f64,
    pub n_paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub decay_horizon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MConvergenceSection {
    pub m_ladder: Vec<f64>,
    pub n_paths: usize,
    pub delta: f64,
    pub eta_amplitude: f64,
    pub eta_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimalitySection {
    pub n_paths: usize,
    pub sample_times: Vec<f64>,
    /// Finite-difference step in the phase coordinate a.
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsSection {
    pub refine_n_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HygieneSection {
    pub strong_dts: Vec<f64>,
    pub strong_horizon: f64,
    pub strong_paths: usize,
    pub strong_epsilon: f64,
    pub strong_amplitude: f64,
}

fn bad(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn builtin() -> Self {
        Self::from_toml(DEFAULT_TOML).expect("builtin config parses")
    }

    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `default` selects the builtin configuration; anything else is a path.
    pub fn load(spec: &str) -> Result<Self, LabError> {
        if spec == "default" {
            return Ok(Self::builtin());
        }
        let path = Path::new(spec);
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let m = &self.model;
        if !(m.gamma > 0.0 && m.sigma > 0.0 && m.theta > 0.0 && m.theta < 1.0) {
            return Err(bad("model: need gamma > 0, sigma > 0, 0 < theta < 1"));
        }
        if !(0.0..1.0).contains(&self.ou.theta) || self.ou.theta == 0.0 {
            return Err(bad("ou.theta must lie in (0,1)"));
        }
        if self.grid.n_points < 16 || !(self.grid.half_length > 0.0) {
            return Err(bad("grid: need n_points >= 16 and half_length > 0"));
        }
        let s = &self.sim;
        if !(s.dt > 0.0 && s.dt <= s.horizon) || !(s.epsilon >= 0.0) || s.record_stride == 0 {
            return Err(bad("sim: need 0 < dt <= horizon, epsilon >= 0, record_stride >= 1"));
        }
        if !(0.0..1.0).contains(&s.q_exponent) {
            return Err(bad("sim.q_exponent must lie in [0,1)"));
        }
        let lad = &self.expansion.epsilon_ladder;
        if lad.is_empty() || lad.windows(2).any(|w| !(w[1] < w[0])) || lad.iter().any(|&e| !(e >= 0.0)) {
            return Err(bad("expansion.epsilon_ladder must be nonempty, nonnegative and strictly decreasing"));
        }
        let counts = [
            self.expansion.n_paths,
            self.diffusion.n_paths,
            self.ou.n_paths,
            self.m_convergence.n_paths,
            self.optimality.n_paths,
            self.hygiene.strong_paths,
            s.n_paths,
        ];
        if counts.contains(&0) {
            return Err(bad("every n_paths must be >= 1"));
        }
        if self.m_convergence.m_ladder.iter().any(|&m| !(m > 0.0)) {
            return Err(bad("m_ladder entries must be positive"));
        }
        if self.diffusion.checkpoints.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
            return Err(bad("diffusion.checkpoints are fractions in (0,1]"));
        }
        if self.hygiene.strong_dts.len() < 2 || self.hygiene.strong_dts.iter().any(|&d| !(d > 0.0)) {
            return Err(bad("hygiene.strong_dts needs at least two positive steps"));
        }
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON form, output_dir
    /// excluded.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("output_dir");
        }
        let json = serde_json::to_vec(&v).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams::new(self.model.gamma, self.model.theta, self.model.sigma)
    }

    pub fn grid_spec(&self) -> Result<GridSpec, LabError> {
        Ok(GridSpec::new(self.grid.half_length, self.grid.n_points)?)
    }

    pub fn eta(&self, grid: &GridSpec) -> Field {
        gaussian_bump(grid, self.sim.eta_amplitude, self.sim.eta_width)
    }
}

pub fn gaussian_bump(grid: &GridSpec, amplitude: f64, width: f64) -> Field {
    Field::from_fn(*grid, |x| amplitude * (-(x * x) / (width * width)).exp())
}
