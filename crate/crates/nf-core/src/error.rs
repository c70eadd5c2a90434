use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bistability violated: F(x)-x has {0} roots in (0,1), expected 3")]
    BistabilityViolated(usize),
    #[error("stability conditions violated: F'(a1)={d1}, F'(a)={dm}, F'(a2)={d2}")]
    StabilityViolated { d1: f64, dm: f64, d2: f64 },
    #[error("cubic solve failed: residual {0:e}")]
    CubicSolveFailed(f64),
    #[error("wave solve diverged after {iterations} iterations (residual {residual:e})")]
    WaveDiverged { iterations: usize, residual: f64 },
    #[error("nonmonotone profile at node {0}")]
    NonmonotoneProfile(usize),
    #[error("domain too small: {0}")]
    DomainTooSmall(String),
    #[error("null space not simple: sigma2/sigma1 = {0:e}")]
    NullSpaceNotSimple(f64),
    #[error("positivity violated: min(psi)/max(psi) = {0:e}")]
    PositivityViolated(f64),
    #[error("spectral gap not observed: kappa = {0}")]
    GapNotObserved(f64),
    #[error("assumption violated on grid: {0}")]
    AssumptionViolated(String),
    #[error("mode set degenerate at mode {0}")]
    ModeSetDegenerate(usize),
    #[error("blow-up at t = {0}")]
    BlowUp(f64),
    #[error("phase ODE unstable: m*dt = {0}")]
    PhaseOdeUnstable(f64),
    #[error("window [{0}, {1}] outside grid")]
    WindowOutsideGrid(f64, f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, Error>;
