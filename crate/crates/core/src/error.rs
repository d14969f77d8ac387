use thiserror::Error;

/// Errors raised by the numerical routines of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("collar profile is not strictly decreasing on [{lo}, {hi}]")]
    NonMonotoneProfile { lo: f64, hi: f64 },
    #[error("invalid collar profile: {0}")]
    InvalidProfile(String),
    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("collar coordinate {0} lies outside [0, 1]")]
    OutOfCollar(f64),
    #[error("vector field split requested at r = {0}")]
    DegenerateAtBoundary(f64),
    #[error("pullback field has a pole at r = {0}")]
    PoleAtBoundary(f64),
    #[error("step size underflow at t = {t} (h = {h:e})")]
    BlowUp { t: f64, h: f64 },
    #[error("trajectory left the chart at t = {0}")]
    EscapedDomain(f64),
    #[error("remainder is not C2 at the boundary: mismatch {0:e}")]
    NotC2(f64),
    #[error("extension constants violate {0}")]
    BadConstants(String),
    #[error("quantitative twist condition fails (margin {0})")]
    QuantitativeTwistFails(f64),
    #[error("quadrature failed to reach tolerance (estimate {0:e})")]
    QuadratureFailure(f64),
    #[error("trajectory entered r < 1 at t = {0}")]
    SampleEscaped(f64),
    #[error("weakened twist condition fails (min h = {0})")]
    TwistFails(f64),
    #[error("xi-frame lost rank")]
    FrameDegenerate,
    #[error("crossing at t = {0} is not isolated/regular")]
    NonIsolatedCrossing(f64),
    #[error("point is not on the variety (defect {0:e})")]
    OffVariety(f64),
    #[error("point is not on the page P0")]
    NotOnPage,
    #[error("ray at incidence angle {0} is tangent or outward")]
    TangentRay(f64),
    #[error("Jacobian is singular")]
    JacobianSingular,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
