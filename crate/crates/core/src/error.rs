use thiserror::Error;

/// Errors produced by the numerical routines.
///
/// Numeric payloads are carried as `f64` regardless of the scalar type so the
/// error stays `'static` and printable.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown weight family `{0}`")]
    UnknownWeight(String),

    #[error("parameters out of range for weight family `{family}`: {reason}")]
    InvalidParams { family: String, reason: String },

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("off-grid shift: t = {0} is not a multiple of the grid step")]
    OffGridShift(f64),

    #[error("scaling overflow: e^(a*L) with a = {a}, L = {half_width} is not representable; shrink L or a")]
    ScalingOverflow { a: f64, half_width: f64 },

    #[error("support exceeds the grid: {0}")]
    SupportOutsideGrid(String),

    #[error("functions live on different grids")]
    GridMismatch,

    #[error("truncation: {0}")]
    Truncation(String),

    #[error("mollifier unresolved: width {width} is below the grid step {step}")]
    MollifierUnresolved { width: f64, step: f64 },

    #[error("inside spectrum: series diverges, |e^alpha| = {modulus} lies in the inflated annulus [{r_in}, {r_out}] of sigma(S)")]
    InsideSpectrum { modulus: f64, r_in: f64, r_out: f64 },

    #[error("not an inside candidate: ln|z| = {log_modulus} lies outside the strip [{a_min}, {a_max}]")]
    NotInsideCandidate {
        log_modulus: f64,
        a_min: f64,
        a_max: f64,
    },

    #[error("probes do not cover the frequency range")]
    ProbesDoNotCover,

    #[error("symbol pole on line a = {a} at t = {t}")]
    SymbolPole { a: f64, t: f64 },

    #[error("invalid rectangle: {0}")]
    InvalidRectangle(String),

    #[error("fast transform cross-check failed: deviation {deviation:e} from direct quadrature")]
    CrossCheck { deviation: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
