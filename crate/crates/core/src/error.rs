use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sequence {user}: squared norm {norm_sq} differs from N = {expected}")]
    NormViolation {
        user: usize,
        norm_sq: f64,
        expected: usize,
    },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("parameter `{0}` must be positive")]
    NonPositiveParameter(&'static str),

    #[error("parameter `{name}` is invalid: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("index {index} out of range {lo}..={hi}")]
    IndexOutOfRange { index: usize, lo: usize, hi: usize },

    #[error("delay {tau} lies outside chip [{lo}, {hi})")]
    TauOutsideChip { tau: f64, lo: f64, hi: f64 },

    #[error("{nu} samples per chip is too coarse (need at least {min})")]
    ResolutionTooCoarse { nu: usize, min: usize },

    #[error("{trials} trials requested, at least {min} required")]
    TooFewTrials { trials: usize, min: usize },

    #[error("starting point is not feasible: {0}")]
    NonFeasibleStart(String),

    #[error("point is not feasible: {0}")]
    NonFeasiblePoint(String),

    #[error("user {user}: every alpha coefficient is below the degeneracy threshold")]
    DegenerateAlpha { user: usize },

    #[error("line search stalled at iteration {iteration} (step {step:e})")]
    LineSearchStall {
        iteration: usize,
        step: f64,
        /// Last accepted iterate, in reduced (alpha-only) coordinates.
        last_alpha: Vec<f64>,
    },

    #[error("LFSR taps do not form a preferred pair: {0}")]
    NotPreferredPair(String),

    #[error("Chebyshev orbit from x0 = {x0} is degenerate")]
    DegenerateOrbit { x0: f64 },

    #[error("unknown preset `{name}`; available: {available}")]
    UnknownPreset { name: String, available: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
