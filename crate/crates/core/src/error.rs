use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Every variant maps to a stable name (see [`Error::kind`]) which the CLI
/// prints when a computation fails.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("Lambert W branch {branch} is undefined at z = 0")]
    BranchDomain { branch: i32 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("exponent {exponent:.3} exceeds the representable range")]
    Overflow { exponent: f64 },

    #[error("Re(lambda) = {re:e} lies on the imaginary axis; use the continued pairing")]
    OnAxis { re: f64 },

    #[error(
        "adaptive quadrature stopped at error estimate {error:e} after {intervals} subintervals"
    )]
    QuadratureFailure { error: f64, intervals: usize },

    #[error("characteristic function nearly vanishes on the contour (|F| = {modulus:e} at {re} + {im}i)")]
    ZeroOnBoundary { modulus: f64, re: f64, im: f64 },

    #[error("winding number {value} is not close to an integer")]
    NonIntegerWinding { value: f64 },

    #[error("derivative of the characteristic function vanishes at {re} + {im}i")]
    DerivativeVanishes { re: f64, im: f64 },

    #[error("box subdivision exceeded {levels} levels")]
    SubdivisionLimit { levels: usize },

    #[error("beta must be nonzero")]
    BetaZero,

    #[error("critical coupling requires omega0 != 0")]
    ZeroFrequency,

    #[error("time step {dt} does not divide the delay {tau} into at least 4 steps")]
    StepMismatch { dt: f64, tau: f64 },

    #[error("|r(t)| = {modulus:e} at t = {t} exceeds the instability threshold")]
    Instability { t: f64, modulus: f64 },

    #[error("fit window [{lo}, {hi}] contains fewer than two samples")]
    WindowEmpty { lo: f64, hi: f64 },

    #[error("|r(t)| = {modulus:e} at t = {t} is below the fit floor")]
    SignalUnderflow { t: f64, modulus: f64 },
}

impl Error {
    /// Stable variant name, used in CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::NonFinite(_) => "NonFinite",
            Error::BranchDomain { .. } => "BranchDomain",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::Overflow { .. } => "Overflow",
            Error::OnAxis { .. } => "OnAxis",
            Error::QuadratureFailure { .. } => "QuadratureFailure",
            Error::ZeroOnBoundary { .. } => "ZeroOnBoundary",
            Error::NonIntegerWinding { .. } => "NonIntegerWinding",
            Error::DerivativeVanishes { .. } => "DerivativeVanishes",
            Error::SubdivisionLimit { .. } => "SubdivisionLimit",
            Error::BetaZero => "BetaZero",
            Error::ZeroFrequency => "ZeroFrequency",
            Error::StepMismatch { .. } => "StepMismatch",
            Error::Instability { .. } => "Instability",
            Error::WindowEmpty { .. } => "WindowEmpty",
            Error::SignalUnderflow { .. } => "SignalUnderflow",
        }
    }

    /// True for errors caused by bad input rather than a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::BetaZero
                | Error::ZeroFrequency
                | Error::StepMismatch { .. }
                | Error::WindowEmpty { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
