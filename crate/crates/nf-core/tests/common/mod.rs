#![allow(dead_code)]

use std::sync::OnceLock;

use nf_core::model::{GridSpec, ModelParams};
use nf_core::noise::{NoiseModel, NoiseSpec, make_noise};
use nf_core::spectral::{SpectralData, SpectralOptions, build_spectral};
use nf_core::wave::{WaveSolution, solve_wave};

/// Coarse version of the default lab: same model and domain, 512 nodes.
pub struct Fixture {
    pub ws: WaveSolution,
    pub sp: SpectralData,
    pub noise: NoiseModel,
}

pub const L: f64 = 40.0;
pub const N: usize = 512;

pub fn params() -> ModelParams {
    ModelParams::new(8.0, 0.6, 1.0)
}

pub fn grid() -> GridSpec {
    GridSpec::new(L, N).unwrap()
}

pub fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let ws = solve_wave(&params(), &grid(), 1e-10).unwrap();
        let sp = build_spectral(&ws, &SpectralOptions::default()).unwrap();
        let noise = make_noise(&NoiseSpec::default(), &ws.grid, Some(&sp.rho)).unwrap();
        Fixture { ws, sp, noise }
    })
}

pub fn symmetric() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let ws = solve_wave(&ModelParams::new(8.0, 0.5, 1.0), &grid(), 1e-10).unwrap();
        let sp = build_spectral(&ws, &SpectralOptions::default()).unwrap();
        let noise = make_noise(&NoiseSpec::default(), &ws.grid, Some(&sp.rho)).unwrap();
        Fixture { ws, sp, noise }
    })
}
