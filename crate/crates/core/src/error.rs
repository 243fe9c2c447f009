use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} index {index} out of range")]
    IndexOutOfRange { what: &'static str, index: usize },

    #[error("point (t={t}, r={r}) lies outside the cone r < t - 1")]
    OutsideCone { t: f64, r: f64 },

    #[error("sigma {sigma} inconsistent with sqrt(1 - |n|^2) = {expected}")]
    SigmaMismatch { sigma: f64, expected: f64 },

    #[error("time window [{need_lo}, {need_hi}] not covered by history [{have_lo}, {have_hi}]")]
    Stale {
        need_lo: f64,
        need_hi: f64,
        have_lo: f64,
        have_hi: f64,
    },

    #[error("non-finite value in {what} at grid index {index:?} (t={t})")]
    NonFinite {
        what: String,
        index: [usize; 3],
        t: f64,
    },

    #[error("boost order {0} exceeds the cap of 2")]
    OrderCap(usize),

    #[error("operator is not negative definite: {0}")]
    Indefinite(String),

    #[error("solver stalled after {iterations} iterations at relative residual {residual:e}")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("support radius {radius} within 4dx of the boundary (half-width {half_width}) at t={t}")]
    SupportBoundary { radius: f64, half_width: f64, t: f64 },

    #[error("time step {dt} exceeds the CFL limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
