use thiserror::Error;

/// Coarse classification used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed or inconsistent user input.
    Input,
    /// Hypothesis (H) fails: the shape functions cannot drive the unstable modes.
    Hypothesis,
    /// An internal invariant broke; indicates a bug rather than bad input.
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("coupling matrix is not in cascade form: entry ({row}, {col}) below the first subdiagonal is {value}")]
    CascadeViolation { row: usize, col: usize, value: f64 },

    #[error("controllability condition violated: subdiagonal entry q[{}][{}] is zero", .index + 1, .index)]
    ControllabilityViolation { index: usize },

    #[error("diffusion coefficient d[{index}] = {value} is not positive")]
    NonPositiveDiffusion { index: usize, value: f64 },

    #[error("boundary coefficients gamma1 and gamma2 are both zero")]
    DegenerateBoundary,

    #[error("boundary coefficients gamma1 = {gamma1}, gamma2 = {gamma2} have opposite signs; the eigenvalue problem would admit a negative eigenvalue")]
    NegativeEigenvalueBoundary { gamma1: f64, gamma2: f64 },

    #[error("shape function {index} is invalid: {reason}")]
    BadShape { index: usize, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("could not bracket eigenvalue root {n}")]
    RootBracketingFailure { n: usize },

    #[error("adaptive quadrature did not converge on [{a}, {b}]")]
    QuadratureNonConvergence { a: f64, b: f64 },

    #[error("generalized Sylvester residual for transform order {order} is {value:e} at entry ({row}, {col})")]
    ResidualNonzero { order: usize, row: usize, col: usize, value: f64 },

    #[error("entry ({row}, {col}) is outside the support of transform order {order}")]
    IndexOutOfSupport { order: usize, row: usize, col: usize },

    #[error("no mode count up to {limit} satisfies the residual-mode condition")]
    BasisExhausted { limit: usize },

    #[error("requested {requested} stabilized modes but at least {minimum} are required")]
    ModeCountTooSmall { requested: usize, minimum: usize },

    #[error("pole placement failed: controllability matrix is singular")]
    PolePlacementSingular,

    #[error("Lyapunov equation has no unique solution")]
    LyapunovSingular,

    #[error("hypothesis (H) violated: input projection matrix has condition number {condition:e}")]
    HypothesisHViolated { condition: f64 },

    #[error("{needed} shape functions are needed but only {available} are given")]
    InsufficientShapes { needed: usize, available: usize },

    #[error("certificate condition failed: {0}")]
    CertificateViolation(String),

    #[error("Riccati synthesis failed: {0}")]
    RiccatiFailure(String),

    #[error("trajectory norm vanished inside the fit window")]
    ZeroNorm,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            HypothesisHViolated { .. } | InsufficientShapes { .. } => ErrorClass::Hypothesis,
            RootBracketingFailure { .. }
            | ResidualNonzero { .. }
            | IndexOutOfSupport { .. }
            | BasisExhausted { .. }
            | PolePlacementSingular
            | LyapunovSingular
            | CertificateViolation(_)
            | RiccatiFailure(_)
            | QuadratureNonConvergence { .. } => ErrorClass::Internal,
            _ => ErrorClass::Input,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
