use std::path::PathBuf;

use crate::model::Chart;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library reports.
///
/// Numerical dead ends that are part of normal operation (an unresolved shot,
/// an orbit that exhausts its arc budget) are *not* errors; they come back as
/// classified outcomes. The variants here are contract violations or
/// situations the caller has to act on.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("exponents out of range: {0}")]
    Domain(String),

    #[error("state outside the {chart:?} chart domain: {reason}")]
    Chart { chart: Chart, reason: String },

    #[error("chart map {from:?} -> {to:?} is singular at this state ({reason})")]
    SingularMap { from: Chart, to: Chart, reason: String },

    #[error("no linearization is used at {0}: {1}")]
    UnsupportedPoint(String, &'static str),

    #[error("bad family parameter {0} (must be finite and > 0)")]
    BadFamilyParam(f64),

    #[error("bad starter offset {0} (must lie in (0, 1e-3])")]
    BadDelta(f64),

    #[error("xi = {xi} lies outside the validity window [{lo}, {hi}] of the local expansion")]
    OutOfValidity { xi: f64, lo: f64, hi: f64 },

    #[error("invalid integration config: {0}")]
    Config(String),

    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64, state: [f64; 3] },

    #[error("trace has no sign change for {0}")]
    NoSuchEvent(String),

    #[error("bracket error: {0}")]
    Bracket(String),

    #[error("ambiguous limit: {0}")]
    AmbiguousLimit(String),

    #[error("certification failure: {0}")]
    Certification(String),

    #[error("trajectory left the trapping region at t = {t}: {reason}")]
    TrapViolation { t: f64, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
