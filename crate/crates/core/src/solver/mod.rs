//! The penalized Galerkin system on `E^M ⊕ N^M`.
//!
//! With `u = w + v`, `w ∈ E⊥`, `v ∈ N`, the residual is
//!
//! ```text
//! E⊥ modes:  R̂ = (4j² − k²) ŵ        − σ f̂(x,u) − ĝ
//! N  modes:  R̂ = −β (1 + k²) v̂       − σ f̂(x,u) − ĝ
//! ```
//!
//! where `ĝ` is an optional manufactured forcing. The functional
//!
//! ```text
//! I(u) = ½|Q| Σ_{E⊥} (4j² − k²)|ŵ|² − (β/2)(‖v‖²_{L²} + ‖v_t‖²_{L²}) − σ∫_Q F(x,u) − ∫_Q g u
//! ```
//!
//! has the residual as its gradient under the pairing `⟨a,b⟩ = ∫_Q a b = |Q| Re Σ â conj b̂`.
//! `f(x,u)` is evaluated pseudospectrally on a padded grid and truncated back to `M`.

mod continuation;
mod linking;
mod newton;
mod search;

pub use continuation::{
    continuation_beta, BetaSchedule, ContinuationRow, ContinuationTrace, MonitoredQuantities, StallReport,
};
pub use linking::{linking_report, LinkingOptions, LinkingReport, LinkingRow, SphereSample};
pub use newton::{newton_solve, LinearSolver, NewtonOptions, SolutionState};
pub use search::{multi_seed_search, search_seed, solve_from_seeds, task_seed, translation_correlation, SearchOptions};

use num_complex::Complex64;

use crate::error::{Result, WaveError};
use crate::nonlinearity::{Nonlinear, Nonlinearity};
use crate::spectral::{
    analyze_complex, grid_t, grid_x, lattice_modes, ModeIndex, SpectralField, SubspaceTag, AREA, DEFAULT_OVERSAMPLE,
};

/// Sign `σ` in `u_tt − u_xx = σ f(x,u)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl TryFrom<i32> for Sign {
    type Error = String;

    fn try_from(v: i32) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(format!("sigma must be 1 or -1, got {other}")),
        }
    }
}

impl From<Sign> for i32 {
    fn from(s: Sign) -> i32 {
        if s == Sign::Plus {
            1
        } else {
            -1
        }
    }
}

#[derive(Clone, Debug)]
pub struct PenalizedProblem<N = Nonlinearity> {
    m: usize,
    beta: f64,
    sigma: Sign,
    nl: N,
    forcing: Option<SpectralField>,
    oversample: usize,
}

impl<N: Nonlinear> PenalizedProblem<N> {
    pub fn new(m: usize, beta: f64, sigma: Sign, nl: N) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(WaveError::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        if m == 0 {
            return Err(WaveError::InvalidArgument("truncation M must be positive".into()));
        }
        Ok(Self {
            m,
            beta,
            sigma,
            nl,
            forcing: None,
            oversample: DEFAULT_OVERSAMPLE,
        })
    }

    /// Adds a manufactured forcing `g`; it must be bandlimited to `M`.
    pub fn with_forcing(mut self, g: SpectralField) -> Result<Self> {
        let outside: f64 = g
            .iter()
            .filter(|(mode, _)| mode.weight() > self.m)
            .map(|(_, c)| c.norm_sqr())
            .sum();
        if outside > 0.0 {
            return Err(WaveError::InvalidArgument(format!(
                "forcing has modes beyond M={}",
                self.m
            )));
        }
        self.forcing = Some(g.resized(self.m));
        Ok(self)
    }

    pub fn with_oversample(mut self, oversample: usize) -> Self {
        self.oversample = oversample.max(2);
        self
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self>
    where
        N: Clone,
    {
        let mut p = self.clone();
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(WaveError::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        p.beta = beta;
        Ok(p)
    }

    /// Same problem at another truncation; the forcing is truncated along.
    pub fn with_truncation(&self, m: usize) -> Self
    where
        N: Clone,
    {
        let mut p = self.clone();
        p.m = m;
        p.forcing = self.forcing.as_ref().map(|g| g.resized(m));
        p
    }

    pub fn truncation(&self) -> usize {
        self.m
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sigma(&self) -> Sign {
        self.sigma
    }

    pub fn nonlinearity(&self) -> &N {
        &self.nl
    }

    pub fn forcing(&self) -> Option<&SpectralField> {
        self.forcing.as_ref()
    }

    pub fn oversample(&self) -> usize {
        self.oversample
    }

    /// Linear diagonal: the symbol on `E⊥`, `−β(1+k²)` on `N`.
    pub fn diagonal(&self, mode: ModeIndex) -> f64 {
        if mode.is_resonant() {
            -self.beta * (1.0 + (mode.k as f64).powi(2))
        } else {
            mode.symbol()
        }
    }

    /// Square padded grid large enough that products up to `(growth+1)·M` do not alias.
    pub fn grid_dims(&self) -> (usize, usize) {
        let factor = self.oversample.max(self.nl.growth().ceil() as usize + 1);
        let n = factor * (self.m + 1) + 2 * self.nl.x_degree();
        let n = n + n % 2;
        (n, n)
    }

    fn sample(&self, u: &SpectralField) -> (Vec<f64>, usize, usize) {
        assert_eq!(u.truncation(), self.m, "field truncation does not match problem");
        let (nx, nt) = self.grid_dims();
        let vals = crate::spectral::synthesize_complex(u, nx, nt);
        (vals.into_iter().map(|c| c.re).collect(), nx, nt)
    }

    fn map_grid(&self, vals: &[f64], nx: usize, nt: usize, op: impl Fn(f64, f64, f64) -> f64) -> Vec<f64> {
        let ts: Vec<f64> = (0..nt).map(|b| grid_t(b, nt)).collect();
        let mut out = Vec::with_capacity(nx * nt);
        for a in 0..nx {
            let x = grid_x(a, nx);
            for (b, &t) in ts.iter().enumerate() {
                out.push(op(x, t, vals[a * nt + b]));
            }
        }
        out
    }

    fn to_coeffs(vals: &[f64], nx: usize, nt: usize, m: usize) -> SpectralField {
        let c: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        analyze_complex(&c, nx, nt, m)
    }

    /// `f̂(x,u)` truncated to `M`.
    pub fn nonlinear_coeffs(&self, u: &SpectralField) -> SpectralField {
        let (vals, nx, nt) = self.sample(u);
        let f = self.map_grid(&vals, nx, nt, |x, t, v| self.nl.value(x, t, v));
        Self::to_coeffs(&f, nx, nt, self.m)
    }

    /// Coefficients of `f_u(x,u)` up to weight `2M`, which is what the
    /// Jacobian's convolution needs.
    pub fn derivative_coeffs(&self, u: &SpectralField) -> SpectralField {
        let (vals, nx, nt) = self.sample(u);
        let fu = self.map_grid(&vals, nx, nt, |x, t, v| self.nl.derivative(x, t, v));
        Self::to_coeffs(&fu, nx, nt, 2 * self.m)
    }

    /// Samples of `f_u(x,u)` on the padded grid.
    pub(crate) fn derivative_grid(&self, u: &SpectralField) -> (Vec<f64>, usize, usize) {
        let (vals, nx, nt) = self.sample(u);
        let fu = self.map_grid(&vals, nx, nt, |x, t, v| self.nl.derivative(x, t, v));
        (fu, nx, nt)
    }

    /// Full spectral residual.
    pub fn residual(&self, u: &SpectralField) -> SpectralField {
        let f = self.nonlinear_coeffs(u);
        self.residual_from(u, &f)
    }

    fn residual_from(&self, u: &SpectralField, f: &SpectralField) -> SpectralField {
        let sigma = self.sigma.value();
        let mut r = u.map(|mode, c| c * self.diagonal(mode));
        r.axpy(-sigma, f);
        if let Some(g) = &self.forcing {
            r.axpy(-1.0, g);
        }
        r
    }

    /// Residual with the forcing left out; used to manufacture forcings.
    pub fn unforced_residual(&self, u: &SpectralField) -> SpectralField {
        let f = self.nonlinear_coeffs(u);
        let sigma = self.sigma.value();
        let mut r = u.map(|mode, c| c * self.diagonal(mode));
        r.axpy(-sigma, &f);
        r
    }

    /// Quadratic part `½⟨Lu, u⟩` of the functional.
    pub fn quadratic_part(&self, u: &SpectralField) -> f64 {
        0.5 * AREA
            * u.iter()
                .map(|(mode, c)| self.diagonal(mode) * c.norm_sqr())
                .sum::<f64>()
    }

    /// `∫_Q F(x,u)` by quadrature on the padded grid.
    pub fn potential(&self, u: &SpectralField) -> f64 {
        let (vals, nx, nt) = self.sample(u);
        let big_f = self.map_grid(&vals, nx, nt, |x, t, v| self.nl.antiderivative(x, t, v));
        AREA * big_f.iter().sum::<f64>() / (nx * nt) as f64
    }

    pub fn functional_i(&self, u: &SpectralField) -> f64 {
        let forcing_term = self.forcing.as_ref().map_or(0.0, |g| pairing(g, u));
        self.quadratic_part(u) - self.sigma.value() * self.potential(u) - forcing_term
    }

    /// `|I(u) − (σ∫(½uf − F) − ½∫gu)|`, which vanishes at critical points:
    /// pairing the residual with `u` gives `2·quad = σ∫uf + ∫gu`, and the
    /// kernel penalty cancels between the two sides.
    pub fn critical_identity_gap(&self, u: &SpectralField) -> f64 {
        let (vals, nx, nt) = self.sample(u);
        let integrand = self.map_grid(&vals, nx, nt, |x, t, v| {
            0.5 * v * self.nl.value(x, t, v) - self.nl.antiderivative(x, t, v)
        });
        let integral = AREA * integrand.iter().sum::<f64>() / (nx * nt) as f64;
        let forcing_term = self.forcing.as_ref().map_or(0.0, |g| pairing(g, u));
        let rhs = self.sigma.value() * integral - 0.5 * forcing_term;
        (self.functional_i(u) - rhs).abs()
    }

    /// `‖R‖_{ℓ²}` over the full lattice.
    pub fn residual_norm(&self, u: &SpectralField) -> f64 {
        self.residual(u).l2_norm()
    }
}

/// `∫_Q a b = |Q| Re Σ â conj b̂` for real fields.
pub fn pairing(a: &SpectralField, b: &SpectralField) -> f64 {
    AREA * a.dot(b).re
}

/// Real coordinates for Hermitian fields: one slot for `(0,0)`, then
/// `(Re, Im)` for every other mode of the half lattice.
#[derive(Clone, Debug)]
pub(crate) struct RealLayout {
    m: usize,
    modes: Vec<ModeIndex>,
    dim: usize,
}

impl RealLayout {
    pub fn new(m: usize) -> Self {
        Self::restricted(m, |_| true)
    }

    /// Layout over the half-lattice modes accepted by `keep`.
    pub fn restricted(m: usize, keep: impl Fn(ModeIndex) -> bool) -> Self {
        let modes: Vec<ModeIndex> = lattice_modes(m)
            .filter(|md| md.in_half_lattice() && keep(*md))
            .collect();
        let dim = modes.iter().map(|&md| if md == ModeIndex::ZERO { 1 } else { 2 }).sum();
        Self { m, modes, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn pack(&self, u: &SpectralField) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim);
        for &md in &self.modes {
            let c = u.get(md);
            x.push(c.re);
            if md != ModeIndex::ZERO {
                x.push(c.im);
            }
        }
        x
    }

    pub fn unpack(&self, x: &[f64]) -> SpectralField {
        let mut u = SpectralField::zeros(self.m);
        let mut i = 0;
        for &md in &self.modes {
            if md == ModeIndex::ZERO {
                u.set_pair(md, Complex64::new(x[i], 0.0));
                i += 1;
            } else {
                u.set_pair(md, Complex64::new(x[i], x[i + 1]));
                i += 2;
            }
        }
        u
    }
}

/// Modes of the positive cone `σ(4j² − k²) > 0` up to weight `l`.
pub(crate) fn linking_cone(sigma: Sign, mode: ModeIndex) -> bool {
    sigma.value() * mode.symbol() > 0.0
}

pub(crate) fn project_tag(u: &SpectralField, tag: SubspaceTag) -> SpectralField {
    crate::spectral::project(u, tag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dalembert::apply_box;
    use crate::nonlinearity::{make_nonlinearity, NonlinearitySpec};
    use crate::spectral::{project, random_field, time_translate};
    use std::f64::consts::PI;

    /// `f(x,t,u) = g(x,t)`, independent of `u`.
    struct FixedSource {
        g: SpectralField,
    }

    impl Nonlinear for FixedSource {
        fn value(&self, x: f64, t: f64, _u: f64) -> f64 {
            self.g
                .iter()
                .map(|(md, c)| (c * Complex64::from_polar(1.0, 2.0 * md.j as f64 * x + md.k as f64 * t)).re)
                .sum()
        }
        fn derivative(&self, _x: f64, _t: f64, _u: f64) -> f64 {
            0.0
        }
        fn antiderivative(&self, x: f64, t: f64, u: f64) -> f64 {
            self.value(x, t, u) * u
        }
        fn growth(&self) -> f64 {
            1.0
        }
    }

    fn default_problem(m: usize, beta: f64, sigma: Sign) -> PenalizedProblem {
        let nl = make_nonlinearity(NonlinearitySpec::default_cubic()).unwrap();
        PenalizedProblem::new(m, beta, sigma, nl).unwrap()
    }

    #[test]
    fn residual_vanishes_at_zero() {
        let p = default_problem(8, 0.1, Sign::Plus);
        assert_eq!(p.residual_norm(&SpectralField::zeros(8)), 0.0);
        assert_eq!(p.functional_i(&SpectralField::zeros(8)), 0.0);
        assert_eq!(p.critical_identity_gap(&SpectralField::zeros(8)), 0.0);
    }

    #[test]
    fn linear_probe_reduces_to_box() {
        let m = 10;
        let g_field = random_field(3, m, SubspaceTag::All, 0.2);
        for sigma in [Sign::Plus, Sign::Minus] {
            let p = PenalizedProblem::new(m, 0.1, sigma, FixedSource { g: g_field.clone() }).unwrap();
            let u = random_field(5, m, SubspaceTag::Eperp, 0.1);
            let r = project(&p.residual(&u), SubspaceTag::Eperp);
            let mut expect = apply_box(&u);
            expect.axpy(-sigma.value(), &project(&g_field, SubspaceTag::Eperp));
            assert!((&r - &expect).l2_norm() <= 1e-12 * expect.l2_norm());
        }
    }

    #[test]
    fn manufactured_forcing_zeroes_residual() {
        let m = 12;
        let target = random_field(7, m, SubspaceTag::All, 0.5);
        let p = default_problem(m, 1e-3, Sign::Plus);
        let g = p.unforced_residual(&target);
        let p = p.with_forcing(g).unwrap();
        assert!(p.residual_norm(&target) <= 1e-11);
    }

    #[test]
    fn kernel_functional_hand_value() {
        // v = cos(2(x+t)): −(β/2)(π² + 4π²) when F is dropped
        let beta = 0.3;
        let m = 8;
        let v = SpectralField::from_mode_pair(m, ModeIndex::new(1, 2), Complex64::new(0.5, 0.0));
        let p = default_problem(m, beta, Sign::Plus);
        let quad = p.quadratic_part(&v);
        assert!((quad + 2.5 * beta * PI * PI).abs() < 1e-12);
        let total = p.functional_i(&v);
        assert!((total - (quad - p.potential(&v))).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_residual() {
        for sigma in [Sign::Plus, Sign::Minus] {
            let p = default_problem(10, 1e-2, sigma);
            let u = random_field(1, 10, SubspaceTag::All, 0.4);
            let phi = random_field(2, 10, SubspaceTag::All, 0.4);
            let h = 1e-5;
            let mut up = u.clone();
            up.axpy(h, &phi);
            let mut um = u.clone();
            um.axpy(-h, &phi);
            let fd = (p.functional_i(&up) - p.functional_i(&um)) / (2.0 * h);
            let exact = pairing(&p.residual(&u), &phi);
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{fd} vs {exact}");
        }
    }

    #[test]
    fn translation_equivariance() {
        let p = default_problem(10, 1e-2, Sign::Plus);
        let (_, nt) = p.grid_dims();
        let u = random_field(4, 10, SubspaceTag::All, 0.3);
        let r0 = p.residual_norm(&u);
        // shifts by whole grid cells commute with sampling
        let r1 = p.residual_norm(&time_translate(&u, 5.0 * 2.0 * PI / nt as f64));
        assert!((r0 - r1).abs() <= 1e-12 * r0);
        // arbitrary shifts only up to aliasing of the tanh part
        let smooth = random_field(4, 10, SubspaceTag::All, 0.8);
        let s0 = p.residual_norm(&smooth);
        let s1 = p.residual_norm(&time_translate(&smooth, 0.9));
        assert!((s0 - s1).abs() <= 1e-10 * s0, "{}", (s0 - s1).abs() / s0);
    }

    #[test]
    fn forcing_must_be_bandlimited() {
        let p = default_problem(6, 0.1, Sign::Plus);
        assert!(p
            .clone()
            .with_forcing(random_field(1, 8, SubspaceTag::All, 0.0))
            .is_err());
        assert!(p.with_forcing(random_field(1, 4, SubspaceTag::All, 0.0)).is_ok());
    }

    #[test]
    fn layout_round_trip() {
        let lay = RealLayout::new(9);
        assert_eq!(lay.dim(), crate::spectral::lattice_size(9));
        let u = random_field(8, 9, SubspaceTag::All, 0.1);
        assert_eq!(lay.unpack(&lay.pack(&u)), u);
    }
}
