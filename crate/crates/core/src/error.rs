use thiserror::Error;

/// Errors produced by the simulation and analysis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("structural mismatch: {0}")]
    Structure(String),

    #[error("non-finite value in state at t = {t:e} s ({what})")]
    NonFinite { t: f64, what: String },

    #[error("step size underflow at t = {t:e} s (h = {h:e} s, max |y| = {max_abs:e})")]
    StepUnderflow { t: f64, h: f64, max_abs: f64 },

    #[error("integration exceeded {steps} steps before reaching t = {t_target:e} s (stopped at {t:e} s)")]
    TooManySteps { steps: usize, t: f64, t_target: f64 },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("unknown preset '{name}' (valid presets: {valid})")]
    UnknownPreset { name: String, valid: String },

    #[error("sample rate {rate:e} Hz cannot represent a {f_if:e} Hz shift without aliasing")]
    Aliasing { rate: f64, f_if: f64 },

    #[error("requested window [{start:e}, {end:e}] s lies outside the data [{data_start:e}, {data_end:e}] s")]
    Range {
        start: f64,
        end: f64,
        data_start: f64,
        data_end: f64,
    },

    #[error("fit rejected: {0}")]
    FitRejected(String),

    #[error("fit did not converge: {0}")]
    NoConvergence(String),

    #[error("not found: {0}")]
    NotFound(String),
}

impl Error {
    /// Whether the failure originated in the numerical integration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::StepUnderflow { .. } | Error::TooManySteps { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
