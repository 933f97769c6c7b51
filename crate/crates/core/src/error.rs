use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("finite-difference step collapsed at coordinate {coord}")]
    StepUnderflow { coord: usize },
    #[error("point is not on the critical manifold (|f| = {residual:e})")]
    NotOnManifold { residual: f64 },
    #[error("sample {index} is not normally hyperbolic (|mu| = {modulus})")]
    NonHyperbolicSample { index: usize, modulus: f64 },
    #[error("Newton iteration diverged at node {node} (residual {residual:e})")]
    NewtonDiverged { node: usize, residual: f64 },
    #[error("singular fast Jacobian at node {node} (det {det:e})")]
    SingularJacobian { node: usize, det: f64 },
    #[error("DfN is singular at a fold (smallest |eigenvalue| {min_eig:e})")]
    FoldSingularity { min_eig: f64 },
    #[error("graph transform is not contracting (sweep {sweep}, update {update:e})")]
    NotContracting { sweep: usize, update: f64 },
    #[error("no convergence after {0} iterations")]
    MaxIterations(usize),
    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),
    #[error("unique-equilibrium assumption violated (discriminant {discriminant})")]
    AssumptionViolated { discriminant: f64 },
    #[error("zero eigenvalue: the fold persists for every step size")]
    ZeroEigenvalue,
    #[error("integrator step size underflow at t = {t} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },
    #[error("no return to the section before t = {t_cap}")]
    NoReturn { t_cap: f64 },
    #[error("tangential crossing of the section (margin {margin:e})")]
    TangentialCrossing { margin: f64 },
    #[error("trajectory left the domain at step {step}")]
    DomainExit { step: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Usage and configuration problems, as opposed to numerical failures.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::ParamOutOfRange(_) | Error::Dimension(_)
        )
    }
}
