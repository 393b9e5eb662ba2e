use thiserror::Error;

use crate::Channel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("data integrity: {0}")]
    DataIntegrity(String),

    #[error("series of length {len} is shorter than the required {min} samples")]
    SeriesTooShort { len: usize, min: usize },

    #[error("no pulse detected above 0.5 Hz")]
    NoPulse,

    #[error("pulse band requires f_p > 0.3 Hz, got {0} Hz")]
    InvalidPulseBand(f64),

    #[error("{channel} channel: {source}")]
    Channel {
        channel: Channel,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid time window {start_s}-{end_s} s: {reason}")]
    InvalidWindow {
        start_s: u32,
        end_s: u32,
        reason: &'static str,
    },

    #[error("window infeasible for BV: shifted window {start_s}-{end_s} s is narrower than 15 s")]
    BvWindowInfeasible { start_s: u32, end_s: u32 },

    #[error("training set needs at least one point of each class")]
    MissingClass,

    #[error("no candidate produced a usable model")]
    NoFeasibleCandidate,

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("need more answers: {question}")]
    NeedMoreAnswers { question: String },

    #[error("answer path is already complete")]
    PathComplete,

    #[error("unknown letter {0:?}")]
    UnknownLetter(String),

    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),

    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),

    #[error("reading {0:?} produces no symbols")]
    EmptyReading(String),

    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    #[error("operation {op} not allowed in phase {phase}")]
    Phase { op: &'static str, phase: String },

    #[error("session limit reached: {0}")]
    SessionLimit(String),

    #[error("accept refused: {0}")]
    AcceptRefused(String),

    #[error("missing calibration model")]
    MissingModel,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn on_channel(self, channel: Channel) -> Self {
        Error::Channel {
            channel,
            source: Box::new(self),
        }
    }

    /// Stable machine-readable code, used by the HTTP layer.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DataIntegrity(_) => "data_integrity",
            Error::SeriesTooShort { .. } => "series_too_short",
            Error::NoPulse => "no_pulse",
            Error::InvalidPulseBand(_) => "invalid_pulse_band",
            Error::Channel { source, .. } => source.code(),
            Error::InvalidWindow { .. } => "invalid_window",
            Error::BvWindowInfeasible { .. } => "bv_window_infeasible",
            Error::MissingClass => "missing_class",
            Error::NoFeasibleCandidate => "no_feasible_candidate",
            Error::Protocol(_) => "protocol",
            Error::NeedMoreAnswers { .. } => "need_more_answers",
            Error::PathComplete => "path_complete",
            Error::UnknownLetter(_) => "unknown_letter",
            Error::UnknownSymbol(_) => "unknown_symbol",
            Error::InvalidSkeleton(_) => "invalid_skeleton",
            Error::EmptyReading(_) => "empty_reading",
            Error::InvalidScheme(_) => "invalid_scheme",
            Error::Phase { .. } => "phase",
            Error::SessionLimit(_) => "session_limit",
            Error::AcceptRefused(_) => "accept_refused",
            Error::MissingModel => "missing_model",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// True when the error reports an operation attempted in the wrong
    /// session phase (or a refused state transition) rather than bad input.
    pub fn is_conflict(&self) -> bool {
        matches!(
            self,
            Error::Phase { .. }
                | Error::SessionLimit(_)
                | Error::AcceptRefused(_)
                | Error::PathComplete
        )
    }
}
