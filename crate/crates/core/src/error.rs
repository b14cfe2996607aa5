use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "basis truncation not converged at {basis_size} states (max level shift {shift:.3e} rad/s)"
    )]
    Truncation { basis_size: usize, shift: f64 },

    /// A qubit transition sits within the resonance guard of the resonator.
    #[error("transition {}->{} within {detuning:.3e} rad/s of the resonator at flux {flux}", .transition.1, .transition.0)]
    Divergence {
        flux: f64,
        transition: (usize, usize),
        detuning: f64,
    },

    #[error("grid point {index}: {source}")]
    GridPoint { index: usize, source: Box<Error> },

    #[error("insufficient time resolution: {0}")]
    Resolution(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("matrix is singular (condition number {condition:.3e})")]
    Singular { condition: f64 },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_grid_point(self, index: usize) -> Self {
        Error::GridPoint {
            index,
            source: Box::new(self),
        }
    }
}
