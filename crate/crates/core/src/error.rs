use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("band {band} is degenerate with a neighbour (gap {gap:.3e} < tolerance {tol:.3e})")]
    DegenerateBand { band: usize, gap: f64, tol: f64 },

    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("covariance tensor is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPhysical(f64),

    #[error("spin vector length {0:.3e} too small: arrow direction undefined")]
    VectorDegenerate(f64),

    #[error("transverse ellipsoid axes are degenerate (F = {0:.12}): tensor azimuth undefined")]
    TensorDegenerate(f64),

    #[error("loop undersampled at sample {index}: angle step {step:.3} rad exceeds pi/2")]
    UndersampledLoop { index: usize, step: f64 },

    #[error("band gap closes on the loop at sample {index} (gap {gap:.3e})")]
    GapClosedOnLoop { index: usize, gap: f64 },

    #[error("band gap closes on the sphere near theta={theta:.6}, phi={phi:.6}")]
    GapClosedOnSphere { theta: f64, phi: f64 },

    #[error("{what} did not converge: {detail}")]
    NotConverged { what: &'static str, detail: String },

    #[error("integration step too large: halving dt changed the result by {0:.3e}")]
    StepTooLarge(f64),

    #[error("sample rate {sample_rate:.4e} Hz is too low for carrier {carrier_hz:.4e} Hz")]
    NyquistViolation { sample_rate: f64, carrier_hz: f64 },

    #[error("populations sum to {0:.4}, more than 5% away from 1")]
    PopulationsInconsistent(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Short variant name, used for diagnostics on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            Error::DegenerateBand { .. } => "DegenerateBand",
            Error::NotHermitian(_) => "NotHermitian",
            Error::NotPhysical(_) => "NotPhysical",
            Error::VectorDegenerate(_) => "VectorDegenerate",
            Error::TensorDegenerate(_) => "TensorDegenerate",
            Error::UndersampledLoop { .. } => "UndersampledLoop",
            Error::GapClosedOnLoop { .. } => "GapClosedOnLoop",
            Error::GapClosedOnSphere { .. } => "GapClosedOnSphere",
            Error::NotConverged { .. } => "NotConverged",
            Error::StepTooLarge(_) => "StepTooLarge",
            Error::NyquistViolation { .. } => "NyquistViolation",
            Error::PopulationsInconsistent(_) => "PopulationsInconsistent",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
