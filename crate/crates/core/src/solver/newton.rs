use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{PenalizedProblem, RealLayout};
use crate::error::{Result, WaveError};
use crate::krylov::gmres;
use crate::nonlinearity::Nonlinear;
use crate::spectral::{analyze_complex, synthesize_complex, ModeIndex, SpectralField};

/// Above this truncation `Auto` switches from a dense LU to GMRES.
pub const DENSE_MAX_TRUNCATION: usize = 64;

/// LU pivots below this fraction of the largest pivot count as singular.
const PIVOT_RATIO_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearSolver {
    #[default]
    Auto,
    Dense,
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub line_search: bool,
    pub linear: LinearSolver,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 40,
            line_search: true,
            linear: LinearSolver::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionState {
    pub u: SpectralField,
    /// `‖R‖_{ℓ²}` over the full lattice.
    pub residual_norm: f64,
    pub i_value: f64,
    pub newton_iters: usize,
    /// Residual norm before each iteration and after the last one.
    pub trace: Vec<f64>,
}

impl SolutionState {
    pub fn v(&self) -> SpectralField {
        super::project_tag(&self.u, crate::spectral::SubspaceTag::Kernel)
    }

    pub fn w(&self) -> SpectralField {
        super::project_tag(&self.u, crate::spectral::SubspaceTag::Eperp)
    }
}

/// Dense real Jacobian in `layout` coordinates. `g` holds the coefficients
/// of `f_u(x,u)` up to weight `2M`.
fn dense_jacobian<N: Nonlinear>(p: &PenalizedProblem<N>, layout: &RealLayout, g: &SpectralField) -> DMatrix<f64> {
    let sigma = p.sigma().value();
    let dim = layout.dim();
    let mut jac = DMatrix::<f64>::zeros(dim, dim);
    let mut col = 0;
    for &md in layout.modes() {
        let parts: &[Complex64] = if md == ModeIndex::ZERO {
            &[Complex64::new(1.0, 0.0)]
        } else {
            &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]
        };
        for &e in parts {
            let mut row = 0;
            for &n in layout.modes() {
                let conv = if md == ModeIndex::ZERO {
                    g.get(n)
                } else {
                    g.get(ModeIndex::new(n.j - md.j, n.k - md.k)) * e
                        + g.get(ModeIndex::new(n.j + md.j, n.k + md.k)) * e.conj()
                };
                let mut val = -sigma * conv;
                if n == md {
                    val += e * p.diagonal(n);
                }
                jac[(row, col)] = val.re;
                row += 1;
                if n != ModeIndex::ZERO {
                    jac[(row, col)] = val.im;
                    row += 1;
                }
            }
            col += 1;
        }
    }
    jac
}

fn solve_dense<N: Nonlinear>(
    p: &PenalizedProblem<N>,
    layout: &RealLayout,
    u: &SpectralField,
    rhs: &[f64],
    iter: usize,
) -> Result<Vec<f64>> {
    let g = p.derivative_coeffs(u);
    let jac = dense_jacobian(p, layout, &g);
    let b = DVector::from_column_slice(rhs);
    let lu = jac.lu();
    let pivots = lu.u().diagonal().map(f64::abs);
    if pivots.min() <= PIVOT_RATIO_FLOOR * pivots.max() {
        return Err(WaveError::SingularJacobian { iter });
    }
    let x = lu.solve(&b).ok_or(WaveError::SingularJacobian { iter })?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(WaveError::SingularJacobian { iter });
    }
    Ok(x.as_slice().to_vec())
}

/// Matrix-free Jacobian solve preconditioned by the Jacobian's diagonal
/// (linear symbol plus the mean of `σ f_u`).
fn solve_iterative<N: Nonlinear>(
    p: &PenalizedProblem<N>,
    layout: &RealLayout,
    u: &SpectralField,
    rhs: &[f64],
    iter: usize,
) -> Result<Vec<f64>> {
    let m = p.truncation();
    let sigma = p.sigma().value();
    let (fu, nx, nt) = p.derivative_grid(u);
    let mean_fu = fu.iter().sum::<f64>() / fu.len() as f64;
    let matvec = |x: &[f64]| {
        let phi = layout.unpack(x);
        let vals = synthesize_complex(&phi, nx, nt);
        let prod: Vec<Complex64> = vals
            .iter()
            .zip(&fu)
            .map(|(v, d)| Complex64::new(v.re * d, 0.0))
            .collect();
        let conv = analyze_complex(&prod, nx, nt, m);
        let mut out = phi.map(|mode, c| c * p.diagonal(mode));
        out.axpy(-sigma, &conv);
        layout.pack(&out)
    };
    let mut diag = Vec::with_capacity(layout.dim());
    for &md in layout.modes() {
        let mut d = p.diagonal(md) - sigma * mean_fu;
        if d.abs() < 1e-8 {
            d = 1.0;
        }
        diag.push(d);
        if md != ModeIndex::ZERO {
            diag.push(d);
        }
    }
    let precond = |x: &[f64]| x.iter().zip(&diag).map(|(a, d)| a / d).collect::<Vec<f64>>();
    let out = gmres(matvec, precond, rhs, 80, 4000, 1e-12);
    if !(out.converged || out.relative_residual <= 1e-8) || out.x.iter().any(|v| !v.is_finite()) {
        return Err(WaveError::SingularJacobian { iter });
    }
    Ok(out.x)
}

/// Newton iteration on the penalized Euler–Lagrange system, with backtracking
/// on `‖R‖` when a full step does not decrease it.
pub fn newton_solve<N: Nonlinear>(
    p: &PenalizedProblem<N>,
    seed_u: &SpectralField,
    opts: &NewtonOptions,
) -> Result<SolutionState> {
    if !(opts.tol > 0.0) {
        return Err(WaveError::InvalidArgument(format!(
            "tol must be positive, got {}",
            opts.tol
        )));
    }
    let m = p.truncation();
    let layout = RealLayout::new(m);
    let use_dense = match opts.linear {
        LinearSolver::Dense => true,
        LinearSolver::Iterative => false,
        LinearSolver::Auto => m <= DENSE_MAX_TRUNCATION,
    };
    let mut u = seed_u.resized(m);
    let mut r = p.residual(&u);
    let mut rn = r.l2_norm();
    let mut trace = vec![rn];
    let mut iters = 0;
    let finish = |u: SpectralField, rn: f64, iters: usize, trace: Vec<f64>| SolutionState {
        i_value: p.functional_i(&u),
        u,
        residual_norm: rn,
        newton_iters: iters,
        trace,
    };

    while rn > opts.tol {
        if iters >= opts.max_iter || !rn.is_finite() {
            return Err(WaveError::NoConvergence {
                iters,
                residual: rn,
                best: Box::new(finish(u, rn, iters, trace.clone())),
                trace,
            });
        }
        let rhs: Vec<f64> = layout.pack(&r).iter().map(|v| -v).collect();
        let step = if use_dense {
            solve_dense(p, &layout, &u, &rhs, iters)?
        } else {
            solve_iterative(p, &layout, &u, &rhs, iters)?
        };
        let delta = layout.unpack(&step);
        iters += 1;

        let mut lambda = 1.0;
        let mut best: Option<(f64, SpectralField, SpectralField)> = None;
        loop {
            let mut trial = u.clone();
            trial.axpy(lambda, &delta);
            let tr = p.residual(&trial);
            let tn = tr.l2_norm();
            let accept = tn.is_finite() && tn <= (1.0 - 1e-4 * lambda) * rn;
            if tn.is_finite() && best.as_ref().is_none_or(|b| tn < b.0) {
                best = Some((tn, trial, tr));
            }
            if accept || !opts.line_search || lambda < 1.0 / 4096.0 {
                break;
            }
            lambda *= 0.5;
        }
        match best {
            Some((tn, trial, tr)) if tn < rn || !opts.line_search => {
                u = trial;
                r = tr;
                rn = tn;
            }
            _ => {
                trace.push(rn);
                return Err(WaveError::NoConvergence {
                    iters,
                    residual: rn,
                    best: Box::new(finish(u, rn, iters, trace.clone())),
                    trace,
                });
            }
        }
        trace.push(rn);
    }
    Ok(finish(u, rn, iters, trace))
}
