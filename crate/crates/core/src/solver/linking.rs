//! Linking-level diagnostics on the cone `C = {σ(4j² − k²) > 0}`.
//!
//! On `C` the signed functional `J = σ·I` has a positive-definite quadratic
//! part and `J → −∞` at infinity, so its maximum over the finite-dimensional
//! space `V_l = span{modes in C, 2|j|+|k| ≤ l}` exists. `M(l) = max_{V_l} J`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::search::task_seed;
use super::{linking_cone, PenalizedProblem};
use crate::error::{Result, WaveError};
use crate::nonlinearity::Nonlinear;
use crate::norms::norm_e;
use crate::spectral::{random_field, SpectralField, SubspaceTag};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkingOptions {
    pub rhos: Vec<f64>,
    pub n_starts: usize,
    pub n_sphere_samples: usize,
    pub max_ascent_iters: usize,
    pub seed: u64,
}

impl Default for LinkingOptions {
    fn default() -> Self {
        Self {
            rhos: vec![0.05, 0.1, 0.2, 0.5],
            n_starts: 4,
            n_sphere_samples: 32,
            max_ascent_iters: 400,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereSample {
    pub rho: f64,
    /// Smallest sampled `σ·I` on the `ρ`-sphere (E-norm) of the cone part above level `l−1`.
    pub inf_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkingRow {
    pub l: usize,
    pub dimension: usize,
    pub max_value: f64,
    pub ascent_iters: usize,
    pub final_gradient: f64,
    pub sphere: Vec<SphereSample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkingReport {
    pub rows: Vec<LinkingRow>,
    pub nondecreasing: bool,
}

fn restrict(u: &SpectralField, sigma: super::Sign, lo: usize, hi: usize) -> SpectralField {
    u.map(|md, c| {
        let w = md.weight();
        if w >= lo && w <= hi && linking_cone(sigma, md) {
            c
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

struct Ascent {
    u: SpectralField,
    value: f64,
    iters: usize,
    grad: f64,
}

/// Preconditioned gradient ascent of `J` on `V_l` with backtracking. The
/// step direction is `σR̂/|4j²−k²|`, which is 1 on the linear part.
fn ascend<N: Nonlinear>(p: &PenalizedProblem<N>, l: usize, start: SpectralField, max_iter: usize) -> Ascent {
    let sigma = p.sigma();
    let s = sigma.value();
    let j_of = |u: &SpectralField| s * p.functional_i(u);
    let mut u = restrict(&start, sigma, 0, l).real_part();
    let mut value = j_of(&u);
    let mut step: f64 = 1.0;
    let mut grad = f64::INFINITY;
    let mut iters = 0;
    while iters < max_iter {
        let d = restrict(&p.residual(&u), sigma, 0, l).map(|md, c| {
            if c == Complex64::new(0.0, 0.0) {
                c
            } else {
                c * (s / md.symbol().abs())
            }
        });
        grad = d.l2_norm() / (1.0 + u.l2_norm());
        if grad < 1e-10 {
            break;
        }
        iters += 1;
        let mut accepted = false;
        step = (step * 2.0).min(1.0);
        while step > 1e-8 {
            let mut trial = u.clone();
            trial.axpy(step, &d);
            let trial = trial.real_part();
            let tv = j_of(&trial);
            if tv.is_finite() && tv >= value {
                u = trial;
                value = tv;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ascent { u, value, iters, grad }
}

fn sphere_infimum<N: Nonlinear>(p: &PenalizedProblem<N>, l: usize, rho: f64, opts: &LinkingOptions) -> f64 {
    let sigma = p.sigma();
    let m = p.truncation();
    (0..opts.n_sphere_samples.max(1))
        .into_par_iter()
        .map(|i| {
            let seed = task_seed(opts.seed ^ 0x5151, (l * 1_000_003 + i) as u64);
            let dir = restrict(&random_field(seed, m, SubspaceTag::All, 0.15), sigma, l, m);
            let n = norm_e(&dir);
            if n == 0.0 {
                return f64::INFINITY;
            }
            sigma.value() * p.functional_i(&dir.scaled(rho / n))
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// For each `l`: `M(l)` by multi-start ascent warm-started from the previous
/// maximizer, and the sampled sphere infimum for every `ρ`.
pub fn linking_report<N: Nonlinear>(
    p: &PenalizedProblem<N>,
    l_values: &[usize],
    opts: &LinkingOptions,
) -> Result<LinkingReport> {
    let m = p.truncation();
    if let Some(&bad) = l_values.iter().find(|&&l| l == 0 || l > m) {
        return Err(WaveError::InvalidArgument(format!("level l={bad} must lie in 1..={m}")));
    }
    let sigma = p.sigma();
    let mut rows = Vec::with_capacity(l_values.len());
    let mut warm = SpectralField::zeros(m);
    for &l in l_values {
        let dimension = super::RealLayout::restricted(m, |md| md.weight() <= l && linking_cone(sigma, md)).dim();
        let mut starts = vec![warm.clone()];
        for i in 0..opts.n_starts {
            let seed = task_seed(opts.seed, (l * 1_000 + i) as u64);
            let f = restrict(&random_field(seed, m, SubspaceTag::All, 0.2), sigma, 0, l);
            let peak = crate::norms::grid_max(&f, 2);
            if peak > 0.0 {
                starts.push(f.scaled((1.0 + i as f64) / peak));
            }
        }
        let best = starts
            .into_par_iter()
            .map(|s| ascend(p, l, s, opts.max_ascent_iters))
            .reduce_with(|a, b| if b.value > a.value { b } else { a })
            .expect("at least the warm start");
        let sphere = opts
            .rhos
            .iter()
            .map(|&rho| SphereSample {
                rho,
                inf_value: sphere_infimum(p, l, rho, opts),
            })
            .collect();
        rows.push(LinkingRow {
            l,
            dimension,
            max_value: best.value,
            ascent_iters: best.iters,
            final_gradient: best.grad,
            sphere,
        });
        warm = best.u;
    }
    let nondecreasing = rows.windows(2).all(|w| w[1].max_value >= w[0].max_value);
    Ok(LinkingReport { rows, nondecreasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{make_nonlinearity, NonlinearitySpec};
    use crate::solver::Sign;

    fn problem(m: usize, sigma: Sign) -> PenalizedProblem {
        let nl = make_nonlinearity(NonlinearitySpec::default_cubic()).unwrap();
        PenalizedProblem::new(m, 1e-2, sigma, nl).unwrap()
    }

    #[test]
    fn level_one_is_at_least_zero() {
        let p = problem(8, Sign::Plus);
        let rep = linking_report(&p, &[1], &LinkingOptions::default()).unwrap();
        assert!(rep.rows[0].max_value >= 0.0);
    }

    #[test]
    fn levels_are_nondecreasing_for_both_signs() {
        for sigma in [Sign::Plus, Sign::Minus] {
            let p = problem(10, sigma);
            let rep = linking_report(
                &p,
                &[2, 4, 6],
                &LinkingOptions {
                    n_starts: 2,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(rep.nondecreasing, "{rep:?}");
            assert!(rep.rows[2].max_value > 0.0);
        }
    }

    #[test]
    fn level_beyond_truncation_is_rejected() {
        let p = problem(6, Sign::Plus);
        assert!(linking_report(&p, &[4, 8], &LinkingOptions::default()).is_err());
    }
}
