use thiserror::Error;

pub type StirapResult<T> = Result<T, StirapError>;

#[derive(Debug, Error)]
pub enum StirapError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("step size underflow at t = {t:.6e} s (h = {h:.3e} s)")]
    StepUnderflow { t: f64, h: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t:.6e} s")]
    StepBudget { t: f64, max_steps: usize },

    #[error("state left the physical set at t = {t:.6e} s: {detail}")]
    InvariantDrift { t: f64, detail: String },

    #[error("minimizer did not converge: {0}")]
    NoConvergence(String),

    #[error("scan point {param} = {value:.6e} failed: {source}")]
    ScanPoint {
        param: String,
        value: f64,
        #[source]
        source: Box<StirapError>,
    },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("degenerate calibration: bright level {bright} must exceed background {background}")]
    DegenerateCalibration { bright: f64, background: f64 },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
