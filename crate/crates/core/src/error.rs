use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("force level {s} is outside the open three-branch range ({lo}, {hi})")]
    OutOfRange { s: f64, lo: f64, hi: f64 },

    #[error("level {0} lies outside every phase interval")]
    LevelOutOfPhase(String),

    #[error("state has no level labelled \"m\" to anchor middle-phase bookkeeping")]
    MissingAnchor,

    #[error("illegal representation change for level {label}: {reason}")]
    IllegalTransition { label: String, reason: String },

    #[error("step size underflow at t = {t:e} (dt = {dt:e})")]
    StepSizeUnderflow { t: f64, dt: f64 },

    #[error("invariant violated at t = {t}: {what}")]
    InvariantViolation { t: f64, what: String },

    #[error("invalid spec: condition {condition} violated ({detail})")]
    InvalidSpec { condition: String, detail: String },

    #[error("invalid ramp: {0}")]
    InvalidRamp(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("mean force {s} is within {band:e} of a critical value of f")]
    NotRegular { s: f64, band: f64 },

    #[error("level {label} is {distance:e} from its branch root, beyond radius {radius:e}")]
    TooFar { label: String, distance: f64, radius: f64 },

    #[error("phase ratio denominator u_m - u_l = {0:e} is degenerate")]
    DegenerateDenominator(f64),

    #[error("state is missing labelled levels: {0}")]
    MissingLabels(String),

    #[error("need at least 10 samples in the fit window, found {0}")]
    InsufficientSamples(usize),

    #[error("operation only defined for the piecewise-linear nonlinearity")]
    PiecewiseLinearOnly,

    #[error("operation only defined for the cubic nonlinearity")]
    CubicOnly,

    #[error("state was not produced by a constructor: {0}")]
    NotConstructed(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("simulation refused: {0}")]
    Infeasible(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
