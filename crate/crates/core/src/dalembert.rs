//! The d'Alembertian `□ = ∂_tt − ∂_xx` as the Fourier multiplier `4j² − k²`.

use num_complex::Complex64;

use crate::error::{Result, WaveError};
use crate::norms::{sobolev_norm, SobolevConvention, EPERP_TOL};
use crate::spectral::{SpectralField, SubspaceTag};

pub const DEFAULT_RESONANT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct BoxSolveResult {
    /// Solution supported on `E⊥`.
    pub w: SpectralField,
    /// ℓ² mass of the right-hand side on the kernel, which was discarded.
    pub dropped_resonant_mass: f64,
}

pub fn apply_box(u: &SpectralField) -> SpectralField {
    u.map(|mode, c| c * mode.symbol())
}

/// Inverts `□` off the kernel: `ŵ = f̂ / (4j² − k²)` on `E⊥`, zero on `N`.
pub fn solve_box(f: &SpectralField, resonant_tol: f64) -> Result<BoxSolveResult> {
    let rel_mass = f.relative_mass_on(SubspaceTag::Kernel);
    if rel_mass > resonant_tol {
        return Err(WaveError::ResonantMass {
            rel_mass,
            tol: resonant_tol,
        });
    }
    let w = f.map(|mode, c| {
        if mode.is_resonant() {
            Complex64::new(0.0, 0.0)
        } else {
            c / mode.symbol()
        }
    });
    Ok(BoxSolveResult {
        w,
        dropped_resonant_mass: f.mass_on(SubspaceTag::Kernel),
    })
}

/// `‖w‖_{H¹}/‖f̂‖_{ℓ²}` for `□w = f`, with the anisotropic `H¹` weight `4j²+k²`.
///
/// Per mode the ratio of weights is `(4j²+k²)/(4j²−k²)² ≤ 1` on the integer
/// non-resonant lattice, so the result never exceeds 1; it equals 1 on `(0,±1)`.
pub fn h1_bound_ratio(f: &SpectralField) -> Result<f64> {
    let rel_mass = f.relative_mass_on(SubspaceTag::Kernel);
    if rel_mass > EPERP_TOL {
        return Err(WaveError::NotInEperp { rel_mass });
    }
    let denom = f.l2_norm();
    if denom == 0.0 {
        return Ok(0.0);
    }
    let w = solve_box(f, EPERP_TOL)?.w;
    Ok(sobolev_norm(&w, 1.0, SobolevConvention::Aniso) / denom)
}
