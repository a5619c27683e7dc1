use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid table entry at index {index}: {reason}")]
    InvalidTable { index: usize, reason: &'static str },

    #[error("quadrature on [{a}, {b}] did not converge (relative change {change:e})")]
    QuadratureNonConvergence { a: f64, b: f64, change: f64 },

    #[error("symmetric eigendecomposition did not converge after {sweeps} sweeps")]
    EigenNonConvergence { sweeps: usize },

    /// The two independent routes to the Lyapunov constant disagree.
    #[error("L' routes disagree: quadrature {quadrature}, curvature {curvature}")]
    InconsistentLyapunov { quadrature: f64, curvature: f64 },

    #[error("concave majorant gap {gap} is not below 1")]
    MajorantGap { gap: f64 },
}
