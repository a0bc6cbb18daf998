//! Spectral Galerkin solver and estimate-verification toolkit for
//! time-periodic semilinear wave equations `u_tt − u_xx = σ f(x,u)` on
//! `Q = [0,π] × [0,2π]`.

// `!(x > 0.0)` style checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dalembert;
pub mod error;
mod krylov;
pub mod nonlinearity;
pub mod norms;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use error::{Result, WaveError};
pub use spectral::{ModeIndex, SpectralField, SubspaceTag};
