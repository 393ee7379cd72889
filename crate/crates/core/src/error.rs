use thiserror::Error;

/// Errors raised by the model, solver, diagnostics and certificate code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("negative initial density {value:e} in cell {cell}")]
    NegativeDensity { cell: usize, value: f64 },
    #[error("initial mass {actual} differs from M = {expected} beyond {tol:e}")]
    MassMismatch {
        expected: f64,
        actual: f64,
        tol: f64,
    },
    #[error("vector length {actual} does not match grid size {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("diffusivity evaluated at negative density {0}")]
    NegativeArgument(f64),
    #[error("diffusivity tail is not integrable; the primitive A(r) = -int_r^inf a is undefined")]
    TailNotIntegrable,
    #[error("bound violated at r = {r}: lhs {lhs} > rhs {rhs}")]
    BoundViolated { r: f64, lhs: f64, rhs: f64 },
    #[error("operation requires eps > 0 (use the elliptic v-solver for eps = 0)")]
    EpsZero,
    #[error("singular elliptic system: compatibility residual {0:e}")]
    SingularSystem(f64),
    #[error("step rejected: {0}")]
    StepRejected(String),
    #[error("comparison V >= V_m violated at t = {t}, x = {x}: V - V_m = {gap:e}")]
    ComparisonViolated { t: f64, x: f64, gap: f64 },
    #[error("exponent q = {q} outside (2, {q_max}]")]
    QOutOfRange { q: f64, q_max: f64 },
    #[error("certificate route not negative: E(X0) = {0}")]
    NotCertified(f64),
    #[error("condition P_q(m_q(0), 0, 0) < 0 fails: value {0}")]
    ConditionA16Fails(f64),
    #[error("model cannot be certified: {0}")]
    ModelNotCertifiable(String),
    #[error("delta = {0} outside (0, 1]")]
    DeltaOutOfRange(f64),
    #[error("file parse error: {0}")]
    FileParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
