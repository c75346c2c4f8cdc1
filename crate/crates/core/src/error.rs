use thiserror::Error;

use crate::flow::FlowState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid weights: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The truncated s-domain does not reach the asymptotic regime.
    #[error("grid half-width {half_width} too small ({reason}); need L >= {required:.2}")]
    InsufficientDomain {
        half_width: f64,
        required: f64,
        reason: String,
    },

    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),

    #[error("transverse curvature not positive at node {index} (R = {value:e})")]
    NonPositiveCurvature { index: usize, value: f64 },

    #[error("flow blew up at t = {t}: {reason}")]
    BlowUp {
        t: f64,
        reason: String,
        last_good: Box<FlowState>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("tube area not positive at t = {t} (focal range reached)")]
    FocalRange { t: f64 },

    #[error("profiles live on incompatible grids")]
    IncompatibleGrids,

    #[error("unavailable: {0}")]
    Unavailable(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BlowUp { .. }
                | Error::Integration(_)
                | Error::FocalRange { .. }
                | Error::NonPositiveCurvature { .. }
                | Error::DegenerateProfile(_)
                | Error::Unavailable(_)
        )
    }
}
