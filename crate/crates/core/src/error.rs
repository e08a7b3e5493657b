use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("truncation n_max = {n_max} too small: discarded probability {discarded:.3e} >= {limit:.1e}")]
    TruncationTooSmall { n_max: usize, discarded: f64, limit: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized (norm^2 = {norm_sqr:.12})")]
    Unnormalized { norm_sqr: f64 },

    #[error("non-physical state: {0}")]
    NonPhysical(String),

    #[error("time {t} outside schedule window [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },

    #[error("integrator could not meet tolerance at t = {t} (step {step:.3e})")]
    ToleranceNotMet { t: f64, step: f64 },

    #[error("projective coordinates blew up at t = {t} (|kappa| = {magnitude:.3e})")]
    BlowUp { t: f64, magnitude: f64 },

    #[error("dimension {dim} exceeds the cap {cap} for {what}")]
    DimensionCap { dim: usize, cap: usize, what: &'static str },

    #[error("photon number would overflow the truncation: |n_max> population {population:.3e}")]
    TruncationOverflow { population: f64 },

    #[error("round cap {0} exceeded")]
    RoundCapExceeded(usize),

    #[error("Wigner grid too small: integral = {integral:.6}")]
    GridTooSmall { integral: f64 },

    #[error("missing level `{0}` in atom level set")]
    UnknownLevel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by the user's input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Json(_)
                | Error::InvalidParameter(_)
                | Error::TruncationTooSmall { .. }
                | Error::UnknownLevel(_)
        )
    }
}
