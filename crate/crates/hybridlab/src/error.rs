use thiserror::Error;

/// Unified error type for the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} s outside profile span [0, {end}] s")]
    OutOfRange { t: f64, end: f64 },

    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("{electrode} electrode {kind} at t = {time} s (c_ss = {c_ss} mol/m^3)")]
    Saturation {
        electrode: &'static str,
        /// "depletion" or "saturation"
        kind: &'static str,
        time: f64,
        c_ss: f64,
    },

    #[error("numerical failure at t = {time} s: {what}")]
    NumericalFailure { time: f64, what: String },

    #[error("rational function denominator near zero at V_s = {0}")]
    Singularity(f64),

    #[error("feature wiring error: {0}")]
    Wiring(String),

    #[error("time-grid mismatch: first offending timestamp {0} s")]
    Alignment(f64),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    TrainingFailure { epoch: usize, loss: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("csv parse error at line {line}: {what}")]
    CsvParse { line: usize, what: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 numerical, 4 data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Solver(_)
            | Error::Saturation { .. }
            | Error::NumericalFailure { .. }
            | Error::Singularity(_)
            | Error::TrainingFailure { .. } => 3,
            _ => 4,
        }
    }
}
