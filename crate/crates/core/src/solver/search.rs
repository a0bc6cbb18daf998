use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::newton::{newton_solve, NewtonOptions, SolutionState};
use super::{linking_cone, PenalizedProblem};
use crate::nonlinearity::Nonlinear;
use crate::spectral::{lattice_modes, random_field, SpectralField, SubspaceTag};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchOptions {
    pub n_seeds: usize,
    pub dedup_threshold: f64,
    pub master_seed: u64,
    pub newton: NewtonOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            n_seeds: 32,
            dedup_threshold: 0.99,
            master_seed: 0,
            newton: NewtonOptions::default(),
        }
    }
}

/// Per-task seed derived from the master seed and the task index.
pub fn task_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed `i`: `0` is the zero field; odd indices are broadband random fields
/// of growing amplitude; even indices are concentrated on the linking cone
/// up to a level `l` that grows with `i`, with amplitude growing in `l`.
pub fn search_seed<N: Nonlinear>(p: &PenalizedProblem<N>, master: u64, i: usize) -> SpectralField {
    let m = p.truncation();
    if i == 0 {
        return SpectralField::zeros(m);
    }
    let rs = task_seed(master, i as u64);
    if i % 2 == 1 {
        let amp = 0.5 * (1.0 + (i / 2) as f64 * 0.5);
        normalize_max(random_field(rs, m, SubspaceTag::All, 0.35), amp)
    } else {
        let level = (1 + (i / 2 - 1) % m.max(1)).min(m);
        let sigma = p.sigma();
        let f = random_field(rs, m, SubspaceTag::All, 0.0).map(|md, c| {
            if md.weight() <= level && linking_cone(sigma, md) {
                c
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        normalize_max(f, (level as f64).sqrt())
    }
}

fn normalize_max(u: SpectralField, amp: f64) -> SpectralField {
    let peak = crate::norms::grid_max(&u, 2);
    if peak == 0.0 {
        u
    } else {
        u.scaled(amp / peak)
    }
}

/// `max_θ ⟨u₁(·,·+θ), u₂⟩ / (‖u₁‖‖u₂‖)`.
///
/// The θ-dependence is the trigonometric polynomial `Σ_k e^{ikθ} c_k` with
/// `c_k = Σ_j û₁(j,k) conj û₂(j,k)`; it is sampled by an FFT and the best
/// sample refined by golden-section search.
pub fn translation_correlation(u1: &SpectralField, u2: &SpectralField) -> f64 {
    let m = u1.truncation().max(u2.truncation());
    let (a, b) = (u1.resized(m), u2.resized(m));
    let (na, nb) = (a.l2_norm(), b.l2_norm());
    if na == 0.0 || nb == 0.0 {
        return if na == nb { 1.0 } else { 0.0 };
    }
    let mi = m as i32;
    let mut ck = vec![Complex64::new(0.0, 0.0); 2 * m + 1];
    for md in lattice_modes(m) {
        ck[(md.k + mi) as usize] += a.get(md) * b.get(md).conj();
    }
    let eval = |theta: f64| -> f64 {
        ck.iter()
            .enumerate()
            .map(|(i, c)| (c * Complex64::from_polar(1.0, (i as i32 - mi) as f64 * theta)).re)
            .sum()
    };
    let n = (8 * (2 * m + 1)).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (i, c) in ck.iter().enumerate() {
        let k = i as i64 - mi as i64;
        buf[k.rem_euclid(n as i64) as usize] = *c;
    }
    // inverse DFT: buf[q] = Σ_k c_k e^{2πikq/n}
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let (qbest, _) = buf.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (q, v)| if v.re > acc.1 { (q, v.re) } else { acc },
    );
    let h = 2.0 * PI / n as f64;
    let (mut lo, mut hi) = ((qbest as f64 - 1.0) * h, (qbest as f64 + 1.0) * h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if eval(x1) > eval(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let best = eval(0.5 * (lo + hi)).max(buf[qbest].re);
    best / (na * nb)
}

/// Below this `ℓ²` norm a solution counts as the trivial one.
pub const TRIVIAL_NORM: f64 = 1e-8;

fn same_orbit(a: &SpectralField, b: &SpectralField, threshold: f64) -> bool {
    match (a.l2_norm() <= TRIVIAL_NORM, b.l2_norm() <= TRIVIAL_NORM) {
        (true, true) => true,
        (false, false) => translation_correlation(a, b) > threshold,
        _ => false,
    }
}

/// Runs Newton from `n_seeds` deterministic seeds and returns the distinct
/// converged solutions sorted by `I`.
pub fn multi_seed_search<N: Nonlinear>(p: &PenalizedProblem<N>, opts: &SearchOptions) -> Vec<SolutionState> {
    let seeds: Vec<SpectralField> = (0..opts.n_seeds.max(1))
        .map(|i| search_seed(p, opts.master_seed, i))
        .collect();
    solve_from_seeds(p, &seeds, opts)
}

/// Newton from each seed (in parallel); failures are dropped and solutions
/// identified modulo time translation, keeping the first in seed order.
pub fn solve_from_seeds<N: Nonlinear>(
    p: &PenalizedProblem<N>,
    seeds: &[SpectralField],
    opts: &SearchOptions,
) -> Vec<SolutionState> {
    let found: Vec<Option<SolutionState>> = seeds
        .par_iter()
        .map(|seed| newton_solve(p, seed, &opts.newton).ok())
        .collect();
    let mut distinct: Vec<SolutionState> = Vec::new();
    for sol in found.into_iter().flatten() {
        let dup = distinct.iter().any(|d| same_orbit(&sol.u, &d.u, opts.dedup_threshold));
        if !dup {
            distinct.push(sol);
        }
    }
    distinct.sort_by(|a, b| a.i_value.total_cmp(&b.i_value));
    distinct
}
