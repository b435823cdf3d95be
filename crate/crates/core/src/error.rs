use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("invalid problem: {0}")]
    Problem(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("dense Hamiltonian refused for n = {0} qubits (limit {max})", max = crate::model::MAX_DENSE_QUBITS)]
    TooLarge(usize),

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("integration step size underflow at tau = {tau:.6e}")]
    StepUnderflow { tau: f64 },

    #[error("integration exceeded {steps} steps at tau = {tau:.6e} (stiff?)")]
    TooManySteps { steps: usize, tau: f64 },

    #[error("positivity violated at tau = {tau:.6e}: minimum eigenvalue {min_eigenvalue:.3e}")]
    Positivity { tau: f64, min_eigenvalue: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
