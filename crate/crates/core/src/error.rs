use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid event: {0}")]
    InvalidEvent(String),

    /// A rate that is zero or negative. Only physical events are representable.
    #[error("physicality violation: {0}")]
    Physicality(String),

    #[error("duplicate event: {0}")]
    Duplicate(String),

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("system is not natural: {0}")]
    NotNatural(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("conservation class error: {0}")]
    Class(String),

    #[error("newton iteration did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    Convergence { iterations: usize, gradient_norm: f64 },

    #[error("atomicity precondition failed: {0}")]
    Atomicity(String),

    #[error("search budget exhausted: {0}")]
    Budget(String),

    #[error("step size underflow at t = {t:e} (h = {step:e})")]
    StepUnderflow { t: f64, step: f64, state: Vec<f64> },

    #[error("step budget of {max_steps} exhausted at t = {t:e}")]
    MaxSteps {
        max_steps: usize,
        t: f64,
        state: Vec<f64>,
    },

    #[error("equilibrium not reached by t = {t:e} (residual {residual:e})")]
    Timeout {
        t: f64,
        residual: f64,
        best_state: Vec<f64>,
    },
}
