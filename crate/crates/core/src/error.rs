use thiserror::Error;

use crate::nonlinearity::Rejection;
use crate::solver::SolutionState;

#[derive(Debug, Error)]
pub enum WaveError {
    #[error("grid {nx}x{nt} too coarse for truncation M={m} (need both >= {need})")]
    GridTooCoarse {
        nx: usize,
        nt: usize,
        m: usize,
        need: usize,
    },

    #[error("field is not supported on the kernel N (relative off-kernel mass {rel_mass:.3e})")]
    NotInKernel { rel_mass: f64 },

    #[error("field has resonant mass on N (relative {rel_mass:.3e}), expected support on E-perp")]
    NotInEperp { rel_mass: f64 },

    #[error("right-hand side has resonant mass {rel_mass:.3e} > tolerance {tol:.1e}; f is not orthogonal to N")]
    ResonantMass { rel_mass: f64, tol: f64 },

    #[error("nonlinearity rejected: {0}")]
    Rejected(Rejection),

    #[error("derivative order {0} is not available")]
    OrderUnavailable(u8),

    #[error("newton did not converge after {iters} iterations (residual {residual:.3e})")]
    NoConvergence {
        iters: usize,
        residual: f64,
        best: Box<SolutionState>,
        trace: Vec<f64>,
    },

    #[error("jacobian is singular at iteration {iter}")]
    SingularJacobian { iter: usize },

    #[error("invalid continuation schedule: {0}")]
    Schedule(String),

    #[error("continuation stalled at beta={beta:.3e}: {source}")]
    StallAt {
        beta: f64,
        #[source]
        source: Box<WaveError>,
    },

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = WaveError> = std::result::Result<T, E>;
