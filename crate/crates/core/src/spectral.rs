//! Real fields on the torus `Q = [0,π] × [0,2π]` in the mode lattice
//! `e^{i(2jx + kt)}`.
//!
//! A [`SpectralField`] stores the complex amplitudes `û(j,k)` for every mode of
//! ℓ¹-weight `2|j| + |k| ≤ M`. Synthesis is `u(x,t) = Σ û(j,k) e^{i(2jx+kt)}` and
//! analysis is `û(j,k) = |Q|⁻¹ ∫_Q u e^{-i(2jx+kt)}`, so Parseval holds with no
//! extra factors. Real fields carry Hermitian symmetry `û(-j,-k) = conj û(j,k)`;
//! a few operations (quadrant splits, complex probes) deliberately produce
//! non-Hermitian fields, so the type does not enforce it.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};

/// Lebesgue measure of `Q = [0,π] × [0,2π]`.
pub const AREA: f64 = 2.0 * PI * PI;

/// Default oversampling over Nyquist for pointwise evaluation and quadrature.
pub const DEFAULT_OVERSAMPLE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub j: i32,
    pub k: i32,
}

impl ModeIndex {
    pub const ZERO: ModeIndex = ModeIndex { j: 0, k: 0 };

    pub const fn new(j: i32, k: i32) -> Self {
        Self { j, k }
    }

    /// ℓ¹ weight `2|j| + |k|` used for truncation and dyadic blocks.
    pub fn weight(self) -> usize {
        (2 * self.j.unsigned_abs() + self.k.unsigned_abs()) as usize
    }

    /// Symbol of `∂_tt − ∂_xx` on this mode: `4j² − k²`.
    pub fn symbol(self) -> f64 {
        let (j, k) = (self.j as i64, self.k as i64);
        (4 * j * j - k * k) as f64
    }

    pub fn is_resonant(self) -> bool {
        self.k.unsigned_abs() == 2 * self.j.unsigned_abs()
    }

    pub fn conj(self) -> Self {
        Self::new(-self.j, -self.k)
    }

    /// Canonical half of the lattice: `k > 0`, or `k = 0` and `j ≥ 0`.
    pub fn in_half_lattice(self) -> bool {
        self.k > 0 || (self.k == 0 && self.j >= 0)
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.j, self.k)
    }
}

/// Subspaces of the mode lattice. `Kernel`, `Eplus` and `Eminus` partition it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubspaceTag {
    /// Resonant modes `|k| = 2|j|` (the kernel of the d'Alembertian).
    Kernel,
    /// Time-dominated modes `|k| > 2|j|`.
    Eplus,
    /// Space-dominated modes `|k| < 2|j|`.
    Eminus,
    /// Every non-resonant mode.
    Eperp,
    All,
}

impl SubspaceTag {
    pub fn contains(self, mode: ModeIndex) -> bool {
        let (aj, ak) = (2 * mode.j.unsigned_abs(), mode.k.unsigned_abs());
        match self {
            SubspaceTag::Kernel => ak == aj,
            SubspaceTag::Eplus => ak > aj,
            SubspaceTag::Eminus => ak < aj,
            SubspaceTag::Eperp => ak != aj,
            SubspaceTag::All => true,
        }
    }
}

impl FromStr for SubspaceTag {
    type Err = WaveError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n" | "kernel" => Ok(Self::Kernel),
            "eplus" | "e+" => Ok(Self::Eplus),
            "eminus" | "e-" => Ok(Self::Eminus),
            "eperp" => Ok(Self::Eperp),
            "all" => Ok(Self::All),
            other => Err(WaveError::InvalidArgument(format!("unknown subspace tag {other:?}"))),
        }
    }
}

/// Truncated Fourier coefficients on the diamond `2|j| + |k| ≤ M`.
///
/// Storage is the bounding rectangle `|j| ≤ M/2, |k| ≤ M`; entries outside the
/// diamond are kept at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    m: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(m: usize) -> Self {
        let jm = m / 2;
        Self {
            m,
            coeffs: vec![Complex64::new(0.0, 0.0); (2 * jm + 1) * (2 * m + 1)],
        }
    }

    /// A real field with a single mode pair: `û(mode) = c`, `û(-mode) = conj c`.
    pub fn from_mode_pair(m: usize, mode: ModeIndex, c: Complex64) -> Self {
        let mut u = Self::zeros(m);
        u.set_pair(mode, c);
        u
    }

    pub fn constant(m: usize, c: f64) -> Self {
        Self::from_mode_pair(m, ModeIndex::ZERO, Complex64::new(c, 0.0))
    }

    pub fn truncation(&self) -> usize {
        self.m
    }

    pub fn jmax(&self) -> i32 {
        (self.m / 2) as i32
    }

    pub fn contains(&self, mode: ModeIndex) -> bool {
        mode.weight() <= self.m
    }

    #[inline]
    fn index(&self, mode: ModeIndex) -> usize {
        let jm = self.m as i32 / 2;
        let width = 2 * self.m as i32 + 1;
        ((mode.j + jm) * width + (mode.k + self.m as i32)) as usize
    }

    /// Coefficient at `mode`; zero for modes outside the truncation.
    #[inline]
    pub fn get(&self, mode: ModeIndex) -> Complex64 {
        if self.contains(mode) {
            self.coeffs[self.index(mode)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Sets one coefficient. Panics if `mode` lies outside the truncation.
    pub fn set(&mut self, mode: ModeIndex, c: Complex64) {
        assert!(self.contains(mode), "mode {mode} outside truncation M={}", self.m);
        let idx = self.index(mode);
        self.coeffs[idx] = c;
    }

    /// Sets `mode` to `c` and its partner `-mode` to `conj c`, keeping the field real.
    pub fn set_pair(&mut self, mode: ModeIndex, c: Complex64) {
        if mode == ModeIndex::ZERO {
            self.set(mode, Complex64::new(c.re, 0.0));
        } else {
            self.set(mode, c);
            self.set(mode.conj(), c.conj());
        }
    }

    /// All modes of the diamond, ordered by `j` then `k`.
    pub fn modes(&self) -> impl Iterator<Item = ModeIndex> + '_ {
        lattice_modes(self.m)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModeIndex, Complex64)> + '_ {
        self.modes().map(move |mode| (mode, self.coeffs[self.index(mode)]))
    }

    pub fn mode_count(&self) -> usize {
        lattice_size(self.m)
    }

    /// Applies `op` to every coefficient of the diamond.
    pub fn map(&self, mut op: impl FnMut(ModeIndex, Complex64) -> Complex64) -> Self {
        let mut out = Self::zeros(self.m);
        for mode in lattice_modes(self.m) {
            let idx = self.index(mode);
            out.coeffs[idx] = op(mode, self.coeffs[idx]);
        }
        out
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Coefficient ℓ² norm `(Σ|û|²)^{1/2}`; equals `(|Q|⁻¹∫|u|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// ℓ² mass of the coefficients that lie in `tag`.
    pub fn mass_on(&self, tag: SubspaceTag) -> f64 {
        self.iter()
            .filter(|(mode, _)| tag.contains(*mode))
            .map(|(_, c)| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Relative ℓ² mass in `tag`; zero for the zero field.
    pub fn relative_mass_on(&self, tag: SubspaceTag) -> f64 {
        let total = self.l2_norm();
        if total == 0.0 {
            0.0
        } else {
            self.mass_on(tag) / total
        }
    }

    /// `max |û(j,k) − conj û(−j,−k)|`.
    pub fn hermitian_defect(&self) -> f64 {
        self.iter()
            .map(|(mode, c)| (c - self.get(mode.conj()).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Coefficients of the real part of the field: `(û(n) + conj û(−n))/2`.
    pub fn real_part(&self) -> Self {
        self.map(|mode, c| 0.5 * (c + self.get(mode.conj()).conj()))
    }

    pub fn is_real(&self, rel_tol: f64) -> bool {
        self.hermitian_defect() <= rel_tol * self.l2_norm().max(f64::MIN_POSITIVE)
    }

    /// Embeds into truncation `m`, dropping modes that no longer fit.
    pub fn resized(&self, m: usize) -> Self {
        let mut out = Self::zeros(m);
        for (mode, c) in self.iter() {
            if out.contains(mode) {
                out.set(mode, c);
            }
        }
        out
    }

    /// Pairwise complex inner product `Σ û₁ conj(û₂)`.
    pub fn dot(&self, other: &Self) -> Complex64 {
        assert_eq!(self.m, other.m, "truncation mismatch");
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b.conj()).sum()
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        assert_eq!(self.m, other.m, "truncation mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * alpha;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            m: self.m,
            coeffs: self.coeffs.iter().map(|c| c * alpha).collect(),
        }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;

    fn add(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;

    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;

    fn neg(self) -> SpectralField {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;

    fn mul(self, rhs: f64) -> SpectralField {
        self.scaled(rhs)
    }
}

/// Modes with `2|j| + |k| ≤ m`, ordered by `j` then `k`.
pub fn lattice_modes(m: usize) -> impl Iterator<Item = ModeIndex> {
    let jm = (m / 2) as i32;
    let m = m as i32;
    (-jm..=jm).flat_map(move |j| {
        let kmax = m - 2 * j.abs();
        (-kmax..=kmax).map(move |k| ModeIndex::new(j, k))
    })
}

pub fn lattice_size(m: usize) -> usize {
    let jm = (m / 2) as i64;
    let m = m as i64;
    (-jm..=jm).map(|j| (2 * (m - 2 * j.abs()) + 1) as usize).sum()
}

/// Real samples on the uniform grid `x_a = πa/nx`, `t_b = 2πb/nt`, stored
/// row-major with `t` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub nx: usize,
    pub nt: usize,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn zeros(nx: usize, nt: usize) -> Self {
        Self {
            nx,
            nt,
            values: vec![0.0; nx * nt],
        }
    }

    pub fn from_fn(nx: usize, nt: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(nx * nt);
        for a in 0..nx {
            for b in 0..nt {
                values.push(f(grid_x(a, nx), grid_t(b, nt)));
            }
        }
        Self { nx, nt, values }
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.nt + b]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Trapezoid integral over `Q`.
    pub fn integral(&self) -> f64 {
        AREA * self.values.iter().sum::<f64>() / (self.nx * self.nt) as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            nx: self.nx,
            nt: self.nt,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

#[inline]
pub fn grid_x(a: usize, nx: usize) -> f64 {
    PI * a as f64 / nx as f64
}

#[inline]
pub fn grid_t(b: usize, nt: usize) -> f64 {
    2.0 * PI * b as f64 / nt as f64
}

/// Square grid size `factor` times over the truncation, never below `2M+2`.
pub fn oversampled_dims(m: usize, factor: usize) -> (usize, usize) {
    let n = (factor.max(1) * (m + 1)).max(2 * m + 2);
    let n = n + n % 2;
    (n, n)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unnormalized 2-D DFT over an `nx × nt` row-major buffer.
fn fft2(buf: &mut [Complex64], nx: usize, nt: usize, inverse: bool) {
    let row = plan(nt, inverse);
    row.process(buf);
    let col = plan(nx, inverse);
    let mut tmp = vec![Complex64::new(0.0, 0.0); nx];
    for b in 0..nt {
        for a in 0..nx {
            tmp[a] = buf[a * nt + b];
        }
        col.process(&mut tmp);
        for a in 0..nx {
            buf[a * nt + b] = tmp[a];
        }
    }
}

/// Complex samples of `u` on an `nx × nt` grid. Requires `nx > M`, `nt > 2M`.
pub(crate) fn synthesize_complex(u: &SpectralField, nx: usize, nt: usize) -> Vec<Complex64> {
    assert!(nx > u.m && nt > 2 * u.m, "grid {nx}x{nt} aliases M={}", u.m);
    let mut buf = vec![Complex64::new(0.0, 0.0); nx * nt];
    for (mode, c) in u.iter() {
        let a = mode.j.rem_euclid(nx as i32) as usize;
        let b = mode.k.rem_euclid(nt as i32) as usize;
        buf[a * nt + b] += c;
    }
    fft2(&mut buf, nx, nt, true);
    buf
}

/// Coefficients of the trigonometric interpolant of complex samples, truncated to `m`.
pub(crate) fn analyze_complex(values: &[Complex64], nx: usize, nt: usize, m: usize) -> SpectralField {
    assert_eq!(values.len(), nx * nt);
    let mut buf = values.to_vec();
    fft2(&mut buf, nx, nt, false);
    let scale = 1.0 / (nx * nt) as f64;
    let mut out = SpectralField::zeros(m);
    for mode in lattice_modes(m) {
        let a = mode.j.rem_euclid(nx as i32) as usize;
        let b = mode.k.rem_euclid(nt as i32) as usize;
        out.set(mode, buf[a * nt + b] * scale);
    }
    out
}

/// Real samples on a padded grid; the imaginary part is discarded.
pub(crate) fn synthesize_real(u: &SpectralField, nx: usize, nt: usize) -> GridField {
    let values = synthesize_complex(u, nx, nt).into_iter().map(|c| c.re).collect();
    GridField { nx, nt, values }
}

pub(crate) fn analyze_real(g: &GridField, m: usize) -> SpectralField {
    let values: Vec<Complex64> = g.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    analyze_complex(&values, g.nx, g.nt, m)
}

fn check_grid(nx: usize, nt: usize, m: usize) -> Result<()> {
    let need = 2 * m + 2;
    if nx < need || nt < need {
        return Err(WaveError::GridTooCoarse { nx, nt, m, need });
    }
    Ok(())
}

/// Coefficients of the trigonometric interpolant of `g` restricted to `2|j|+|k| ≤ m`.
pub fn analyze(g: &GridField, m: usize) -> Result<SpectralField> {
    check_grid(g.nx, g.nt, m)?;
    Ok(analyze_real(g, m))
}

/// Samples a real field on an `nx × nt` grid.
pub fn synthesize(u: &SpectralField, nx: usize, nt: usize) -> Result<GridField> {
    check_grid(nx, nt, u.m)?;
    if !u.is_real(1e-12) {
        return Err(WaveError::InvalidField(format!(
            "cannot synthesize a non-Hermitian field to real samples (defect {:.3e})",
            u.hermitian_defect()
        )));
    }
    Ok(synthesize_real(u, nx, nt))
}

/// Zeroes every coefficient outside `tag`.
pub fn project(u: &SpectralField, tag: SubspaceTag) -> SpectralField {
    u.map(|mode, c| {
        if tag.contains(mode) {
            c
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Keeps modes with `2|j| + |k| ≤ m_new`; the truncation label becomes `min(M, m_new)`.
pub fn truncate(u: &SpectralField, m_new: usize) -> SpectralField {
    if m_new >= u.m {
        u.clone()
    } else {
        u.resized(m_new)
    }
}

/// `u(x, t) ↦ u(x, t + θ)`.
pub fn time_translate(u: &SpectralField, theta: f64) -> SpectralField {
    u.map(|mode, c| c * Complex64::from_polar(1.0, mode.k as f64 * theta))
}

/// A π-periodic function `p(y) = Σ c_j e^{2ijy}` with `|j| ≤ jmax`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicSeries {
    jmax: i32,
    coeffs: Vec<Complex64>,
}

impl PeriodicSeries {
    pub fn zeros(jmax: i32) -> Self {
        Self {
            jmax,
            coeffs: vec![Complex64::new(0.0, 0.0); (2 * jmax + 1) as usize],
        }
    }

    pub fn jmax(&self) -> i32 {
        self.jmax
    }

    pub fn coeff(&self, j: i32) -> Complex64 {
        if j.abs() > self.jmax {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(j + self.jmax) as usize]
        }
    }

    pub fn set_coeff(&mut self, j: i32, c: Complex64) {
        assert!(j.abs() <= self.jmax);
        self.coeffs[(j + self.jmax) as usize] = c;
    }

    pub fn eval(&self, y: f64) -> f64 {
        (-self.jmax..=self.jmax)
            .map(|j| (self.coeff(j) * Complex64::from_polar(1.0, 2.0 * j as f64 * y)).re)
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Travelling-wave profiles of a kernel field, `v(x,t) = p1(x+t) + p2(x−t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelProfiles {
    pub p1: PeriodicSeries,
    pub p2: PeriodicSeries,
}

impl KernelProfiles {
    /// Rebuilds the kernel field at truncation `m`.
    pub fn reconstruct(&self, m: usize) -> SpectralField {
        let mut v = SpectralField::zeros(m);
        let jm = self.p1.jmax.max(self.p2.jmax);
        for j in -jm..=jm {
            for (mode, c) in [
                (ModeIndex::new(j, 2 * j), self.p1.coeff(j)),
                (ModeIndex::new(j, -2 * j), self.p2.coeff(j)),
            ] {
                if v.contains(mode) {
                    let prev = v.get(mode);
                    v.set(mode, prev + c);
                }
            }
        }
        v
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.p1.eval(x + t) + self.p2.eval(x - t)
    }
}

/// Splits a kernel field into travelling waves. The constant mode is shared
/// equally between the two profiles.
pub fn kernel_decompose(v: &SpectralField) -> Result<KernelProfiles> {
    let rel_mass = v.relative_mass_on(SubspaceTag::Eperp);
    if rel_mass > 1e-12 {
        return Err(WaveError::NotInKernel { rel_mass });
    }
    let jm = (v.m / 4) as i32;
    let mut p1 = PeriodicSeries::zeros(jm);
    let mut p2 = PeriodicSeries::zeros(jm);
    for j in -jm..=jm {
        if j == 0 {
            let half = v.get(ModeIndex::ZERO) * 0.5;
            p1.set_coeff(0, half);
            p2.set_coeff(0, half);
        } else {
            p1.set_coeff(j, v.get(ModeIndex::new(j, 2 * j)));
            p2.set_coeff(j, v.get(ModeIndex::new(j, -2 * j)));
        }
    }
    Ok(KernelProfiles { p1, p2 })
}

fn mode_seed(seed: u64, mode: ModeIndex) -> u64 {
    // splitmix64 finalizer over (seed, j, k)
    let mut z = seed
        ^ (mode.j as i64 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (mode.k as i64 as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hermitian random field on `tag` with `|û(j,k)| = e^{−decay·(2|j|+|k|)}` and
/// uniform phases.
///
/// Each mode draws its phase from a generator keyed on `(seed, j, k)`, so the
/// field at truncation `M` is the truncation of the field at any `M' > M`.
pub fn random_field(seed: u64, m: usize, tag: SubspaceTag, decay: f64) -> SpectralField {
    let mut u = SpectralField::zeros(m);
    for mode in lattice_modes(m).filter(|md| md.in_half_lattice() && tag.contains(*md)) {
        let mut rng = ChaCha8Rng::seed_from_u64(mode_seed(seed, mode));
        let mag = (-decay * mode.weight() as f64).exp();
        let c = if mode == ModeIndex::ZERO {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            Complex64::new(sign * mag, 0.0)
        } else {
            Complex64::from_polar(mag, rng.random_range(0.0..2.0 * PI))
        };
        u.set_pair(mode, c);
    }
    u
}

/// One stored coefficient of the half lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffEntry {
    pub j: i32,
    pub k: i32,
    pub re: f64,
    pub im: f64,
}

/// On-disk field format. Only the half lattice is stored; readers restore the
/// Hermitian partners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldFile {
    #[serde(rename = "M")]
    pub m: usize,
    pub domain: String,
    pub normalization: String,
    pub coeffs: Vec<CoeffEntry>,
}

pub const DOMAIN_TAG: &str = "x:[0,pi],t:[0,2pi]";
pub const NORMALIZATION_TAG: &str = "unit-modes";

impl FieldFile {
    pub fn from_field(u: &SpectralField) -> Result<Self> {
        if !u.is_real(1e-12) {
            return Err(WaveError::InvalidField(
                "only Hermitian (real) fields can be written".into(),
            ));
        }
        let coeffs = u
            .iter()
            .filter(|(mode, _)| mode.in_half_lattice())
            .map(|(mode, c)| CoeffEntry {
                j: mode.j,
                k: mode.k,
                re: c.re,
                im: c.im,
            })
            .collect();
        Ok(Self {
            m: u.m,
            domain: DOMAIN_TAG.into(),
            normalization: NORMALIZATION_TAG.into(),
            coeffs,
        })
    }

    pub fn to_field(&self) -> Result<SpectralField> {
        if self.domain != DOMAIN_TAG {
            return Err(WaveError::InvalidField(format!("unsupported domain {:?}", self.domain)));
        }
        if self.normalization != NORMALIZATION_TAG {
            return Err(WaveError::InvalidField(format!(
                "unsupported normalization {:?}",
                self.normalization
            )));
        }
        let mut u = SpectralField::zeros(self.m);
        let mut seen = std::collections::HashSet::new();
        for e in &self.coeffs {
            let mode = ModeIndex::new(e.j, e.k);
            if !mode.in_half_lattice() {
                return Err(WaveError::InvalidField(format!(
                    "mode {mode} is not in the stored half lattice"
                )));
            }
            if !u.contains(mode) {
                return Err(WaveError::InvalidField(format!("mode {mode} exceeds M={}", self.m)));
            }
            if !seen.insert(mode) {
                return Err(WaveError::InvalidField(format!("mode {mode} listed twice")));
            }
            if mode == ModeIndex::ZERO && e.im != 0.0 {
                return Err(WaveError::InvalidField("mode (0,0) must be real".into()));
            }
            u.set_pair(mode, Complex64::new(e.re, e.im));
        }
        Ok(u)
    }
}

pub fn field_to_json(u: &SpectralField) -> Result<String> {
    Ok(serde_json::to_string_pretty(&FieldFile::from_field(u)?)?)
}

pub fn field_from_json(text: &str) -> Result<SpectralField> {
    serde_json::from_str::<FieldFile>(text)?.to_field()
}

pub fn write_field(path: impl AsRef<Path>, u: &SpectralField) -> Result<()> {
    std::fs::write(path, field_to_json(u)?)?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<SpectralField> {
    field_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_mode(m: usize, j: i32, k: i32) -> SpectralField {
        SpectralField::from_mode_pair(m, ModeIndex::new(j, k), Complex64::new(0.5, 0.0))
    }

    #[test]
    fn lattice_size_matches_enumeration() {
        for m in 0..20 {
            assert_eq!(lattice_size(m), lattice_modes(m).count());
        }
        assert_eq!(lattice_size(24), 601);
    }

    #[test]
    fn resonance_and_symbol() {
        assert!(ModeIndex::new(0, 0).is_resonant());
        assert!(ModeIndex::new(-2, 4).is_resonant());
        assert!(!ModeIndex::new(1, 3).is_resonant());
        assert_eq!(ModeIndex::new(1, 3).symbol(), -5.0);
        for mode in lattice_modes(12) {
            assert_eq!(mode.symbol() == 0.0, mode.is_resonant());
        }
    }

    #[test]
    fn tags_partition_lattice() {
        for mode in lattice_modes(16) {
            let n = [SubspaceTag::Kernel, SubspaceTag::Eplus, SubspaceTag::Eminus]
                .iter()
                .filter(|t| t.contains(mode))
                .count();
            assert_eq!(n, 1);
            assert_eq!(SubspaceTag::Eperp.contains(mode), !SubspaceTag::Kernel.contains(mode));
        }
    }

    #[test]
    fn analyze_single_mode() {
        let g = GridField::from_fn(12, 12, |x, t| (2.0 * x + 3.0 * t).cos());
        let u = analyze(&g, 5).unwrap();
        for (mode, c) in u.iter() {
            let expect = if mode == ModeIndex::new(1, 3) || mode == ModeIndex::new(-1, -3) {
                0.5
            } else {
                0.0
            };
            assert!((c - Complex64::new(expect, 0.0)).norm() < 1e-14, "{mode}: {c}");
        }
    }

    #[test]
    fn analyze_constant() {
        let g = GridField::from_fn(10, 10, |_, _| 1.0);
        let u = analyze(&g, 4).unwrap();
        assert!((u.get(ModeIndex::ZERO).re - 1.0).abs() < 1e-15);
        assert!(u.l2_norm() - 1.0 < 1e-14);
    }

    #[test]
    fn analyze_rejects_coarse_grid() {
        let g = GridField::zeros(8, 12);
        assert!(matches!(analyze(&g, 5), Err(WaveError::GridTooCoarse { .. })));
        assert!(matches!(
            synthesize(&SpectralField::zeros(5), 12, 11),
            Err(WaveError::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn synthesize_known_fields() {
        let one = synthesize(&SpectralField::constant(3, 1.0), 8, 8).unwrap();
        assert!(one.values.iter().all(|v| (v - 1.0).abs() < 1e-15));

        let u = cos_mode(6, 1, 2);
        let g = synthesize(&u, 14, 16).unwrap();
        for a in 0..g.nx {
            for b in 0..g.nt {
                let expect = (2.0 * grid_x(a, g.nx) + 2.0 * grid_t(b, g.nt)).cos();
                assert!((g.at(a, b) - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn synthesize_rejects_complex_field() {
        let mut u = SpectralField::zeros(4);
        u.set(ModeIndex::new(1, 1), Complex64::new(1.0, 0.0));
        assert!(synthesize(&u, 10, 10).is_err());
    }

    #[test]
    fn round_trip_random_fields() {
        let m = 16;
        let (nx, nt) = (2 * m + 2, 2 * m + 2);
        for seed in 0..100 {
            let u = random_field(seed, m, SubspaceTag::All, 0.1);
            let back = analyze(&synthesize(&u, nx, nt).unwrap(), m).unwrap();
            assert!((&back - &u).l2_norm() <= 1e-12 * u.l2_norm());
        }
    }

    #[test]
    fn synthesize_analyze_idempotent_on_bandlimited_grid() {
        let u = random_field(3, 8, SubspaceTag::All, 0.0);
        let g = synthesize(&u, 20, 22).unwrap();
        let g2 = synthesize(&analyze(&g, 8).unwrap(), 20, 22).unwrap();
        let err = g
            .values
            .iter()
            .zip(&g2.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let res = cos_mode(6, 1, 2);
        assert_eq!(project(&res, SubspaceTag::Kernel), res);
        assert!(project(&res, SubspaceTag::Eperp).is_zero());

        let plus = cos_mode(6, 1, 3);
        assert_eq!(project(&plus, SubspaceTag::Eplus), plus);
        assert!(project(&plus, SubspaceTag::Kernel).is_zero());
    }

    #[test]
    fn projections_sum_and_parseval() {
        for seed in 0..20 {
            let u = random_field(seed, 12, SubspaceTag::All, 0.0);
            let parts = [SubspaceTag::Kernel, SubspaceTag::Eplus, SubspaceTag::Eminus].map(|t| project(&u, t));
            let sum = &(&parts[0] + &parts[1]) + &parts[2];
            assert_eq!(sum, u);
            let sq: f64 = parts.iter().map(|p| p.l2_norm_sq()).sum();
            assert!((sq - u.l2_norm_sq()).abs() <= 1e-12 * u.l2_norm_sq());
        }
    }

    #[test]
    fn parseval_by_quadrature() {
        let u = random_field(11, 10, SubspaceTag::All, 0.05);
        let (nx, nt) = oversampled_dims(10, DEFAULT_OVERSAMPLE);
        let g = synthesize(&u, nx, nt).unwrap();
        let mean_sq = g.map(|v| v * v).integral() / AREA;
        assert!((mean_sq - u.l2_norm_sq()).abs() <= 1e-10 * u.l2_norm_sq());
    }

    #[test]
    fn truncate_examples() {
        let u = cos_mode(6, 1, 3);
        assert!(truncate(&u, 4).is_zero());
        assert_eq!(truncate(&u, 6), u);
        assert_eq!(truncate(&u, 9), u);
        let r = random_field(1, 12, SubspaceTag::All, 0.0);
        assert!(truncate(&r, 7).l2_norm() <= r.l2_norm());
    }

    #[test]
    fn time_translation() {
        let u = random_field(5, 10, SubspaceTag::All, 0.0);
        let full = time_translate(&u, 2.0 * PI);
        assert!((&full - &u).l2_norm() <= 1e-12 * u.l2_norm());

        let c = cos_mode(4, 0, 1);
        let shifted = time_translate(&c, PI / 2.0);
        let g = synthesize(&shifted, 10, 10).unwrap();
        for b in 0..10 {
            assert!((g.at(0, b) + grid_t(b, 10).sin()).abs() < 1e-14);
        }

        let a = time_translate(&time_translate(&u, 0.3), 1.1);
        let b = time_translate(&u, 1.4);
        assert!((&a - &b).l2_norm() < 1e-13);
    }

    #[test]
    fn kernel_decompose_examples() {
        let v = cos_mode(8, 1, 2);
        let kp = kernel_decompose(&v).unwrap();
        assert!((kp.p1.coeff(1).re - 0.5).abs() < 1e-15);
        assert!((kp.p1.coeff(-1).re - 0.5).abs() < 1e-15);
        assert!(kp.p2.l2_norm() < 1e-15);

        let c = SpectralField::constant(4, 3.0);
        let kp = kernel_decompose(&c).unwrap();
        assert!((kp.p1.coeff(0).re - 1.5).abs() < 1e-15);
        assert!((kp.p2.coeff(0).re - 1.5).abs() < 1e-15);

        assert!(matches!(
            kernel_decompose(&cos_mode(8, 1, 3)),
            Err(WaveError::NotInKernel { .. })
        ));
    }

    #[test]
    fn kernel_reconstruction_on_grid() {
        let v = random_field(9, 16, SubspaceTag::Kernel, 0.1);
        let kp = kernel_decompose(&v).unwrap();
        assert_eq!(kp.reconstruct(16), v);
        let g = synthesize(&v, 34, 34).unwrap();
        for a in (0..34).step_by(5) {
            for b in (0..34).step_by(3) {
                let direct = kp.eval(grid_x(a, 34), grid_t(b, 34));
                assert!((g.at(a, b) - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_field_properties() {
        let u = random_field(42, 10, SubspaceTag::All, 0.5);
        assert_eq!(u, random_field(42, 10, SubspaceTag::All, 0.5));
        assert!(u.is_real(1e-15));
        for (mode, c) in u.iter() {
            assert!((c.norm() - (-0.5 * mode.weight() as f64).exp()).abs() < 1e-14);
        }
        let flat = random_field(1, 6, SubspaceTag::All, 0.0);
        assert!(flat.iter().all(|(_, c)| (c.norm() - 1.0).abs() < 1e-14));
        let e = random_field(1, 10, SubspaceTag::Eperp, 0.0);
        assert_eq!(e.mass_on(SubspaceTag::Kernel), 0.0);
        // nested truncations agree
        let big = random_field(7, 20, SubspaceTag::All, 0.1);
        assert_eq!(truncate(&big, 10), random_field(7, 10, SubspaceTag::All, 0.1));
    }

    #[test]
    fn field_file_round_trip_and_validation() {
        let u = random_field(3, 6, SubspaceTag::All, 0.2);
        let text = field_to_json(&u).unwrap();
        assert_eq!(field_from_json(&text).unwrap(), u);

        let bad = r#"{"M":4,"domain":"x:[0,pi],t:[0,2pi]","normalization":"unit-modes","coeffs":[{"j":1,"k":-1,"re":1.0,"im":0.0}]}"#;
        assert!(field_from_json(bad).is_err());
        let extra = r#"{"M":4,"domain":"x:[0,pi],t:[0,2pi]","normalization":"unit-modes","coeffs":[],"x":1}"#;
        assert!(field_from_json(extra).is_err());
    }
}
