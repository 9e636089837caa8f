use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("missing config key `{0}`")]
    MissingKey(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("state is not normalized (|norm - 1| = {deviation:.3e})")]
    Unnormalized { deviation: f64 },

    #[error("particle number {n} exceeds the cap of {cap}{hint}")]
    ParticleCap { n: usize, cap: usize, hint: &'static str },

    #[error("non-finite amplitude after stage `{stage}`")]
    NonFinite { stage: &'static str },

    #[error("population left the simulated sites during stage `{stage}`")]
    LeftWindow { stage: &'static str },

    #[error("visibility {0:.3e} is too small for a squeezing parameter")]
    DegenerateVisibility(f64),

    #[error("relative gravity uncertainty is undefined for g = 0")]
    ZeroGravity,

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by the user's input rather than by the computation.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParam { .. }
                | Error::MissingKey(_)
                | Error::Config(_)
                | Error::ParticleCap { .. }
                | Error::Json(_)
        )
    }
}
