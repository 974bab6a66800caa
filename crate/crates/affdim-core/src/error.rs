use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared by all modules of the toolkit.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("matrix is singular or numerically singular (|det| = {det:e})")]
    SingularMatrix { det: f64 },
    #[error("singular values coincide (relative gap {gap:e}); major direction undefined")]
    EqualSingularValues { gap: f64 },
    #[error("symbol {symbol} out of range for alphabet of size {alphabet}")]
    IndexOutOfRange { symbol: usize, alphabet: usize },
    #[error("enumeration budget exceeded: {needed} words > cap {cap}")]
    BudgetExceeded { needed: u64, cap: u64 },
    #[error("empty measure (no mass in the requested region)")]
    EmptyMeasure,
    #[error("fit window too wide: {occupied} occupied cells at top level needs {required} samples, have {available}")]
    WindowTooWide {
        occupied: usize,
        required: usize,
        available: usize,
    },
    #[error("bias rule violated: level {level} needs {required} samples, have {available}")]
    BiasRuleViolated {
        level: u32,
        required: usize,
        available: usize,
    },
    #[error("invalid probability vector: {reason}")]
    InvalidProbabilityVector { reason: String },
    #[error("invalid Lyapunov exponents: need chi2 < chi1 < 0, got chi1 = {chi1}, chi2 = {chi2}")]
    InvalidExponents { chi1: f64, chi2: f64 },
    #[error("degenerate system: {reason}")]
    DegenerateSystem { reason: String },
    #[error("degenerate point cloud: {distinct} distinct points")]
    DegenerateCloud { distinct: usize },
    #[error("no common real eigendirection: system is not triangularizable")]
    NotTriangular,
    #[error("no cylinder word reaches the conditioning cell")]
    EmptyFiber,
    #[error("invalid eccentricity: a1 = {a1} must exceed a2 = {a2}")]
    InvalidEccentricity { a1: f64, a2: f64 },
    #[error("precondition violated: {reason}")]
    PreconditionViolated { reason: String },
    #[error("config parse error at {location}: {reason}")]
    ParseError { location: String, reason: String },
    #[error("config validation error at {field}: {reason}")]
    ValidationError { field: String, reason: String },
}
