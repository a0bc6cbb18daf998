//! Admissible nonlinearities `f(x,u) = a(x)|u|^{s−1}u + m(u) + b(x)`.
//!
//! `a` and `b` are π-periodic trigonometric polynomials and `m` is a bounded
//! monotone part. Acceptance requires `s ≥ 3`, `min a > 0`,
//! `min a > max a/(s+1)` and a positive monotonicity floor `inf f_u > 0`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::spectral::GridField;

/// `c·cos(2jx) + c_sin·sin(2jx)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub j: u32,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub c_sin: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrigPoly(pub Vec<TrigTerm>);

impl TrigPoly {
    pub fn constant(c: f64) -> Self {
        Self(vec![TrigTerm { j: 0, c, c_sin: 0.0 }])
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0
            .iter()
            .map(|t| {
                let ph = 2.0 * t.j as f64 * x;
                t.c * ph.cos() + t.c_sin * ph.sin()
            })
            .sum()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|t| t.j).max().unwrap_or(0)
    }

    /// `(min, max)` over a grid 64 times finer than the highest frequency.
    pub fn range(&self) -> (f64, f64) {
        let n = 64 * (self.degree() as usize + 1);
        (0..n)
            .map(|i| self.eval(PI * i as f64 / n as f64))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

/// Bounded monotone part `m(u)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MonotonePart {
    None,
    /// `m(u) = B·tanh(αu/B)`: slope `α` at the origin, `sup|m| = B`.
    Tanh {
        alpha: f64,
        #[serde(default = "default_bound")]
        bound: f64,
    },
}

fn default_bound() -> f64 {
    1.0
}

impl MonotonePart {
    /// Derivatives `m^{(order)}(u)` for `order ≤ 3`.
    pub fn derivative(&self, u: f64, order: u8) -> f64 {
        match *self {
            MonotonePart::None => 0.0,
            MonotonePart::Tanh { alpha, bound } => {
                let th = (alpha * u / bound).tanh();
                let sech2 = 1.0 - th * th;
                match order {
                    0 => bound * th,
                    1 => alpha * sech2,
                    2 => -2.0 * alpha * alpha / bound * sech2 * th,
                    _ => -2.0 * alpha.powi(3) / (bound * bound) * sech2 * (1.0 - 3.0 * th * th),
                }
            }
        }
    }

    /// `∫₀ᵘ m`.
    pub fn antiderivative(&self, u: f64) -> f64 {
        match *self {
            MonotonePart::None => 0.0,
            MonotonePart::Tanh { alpha, bound } => {
                let z = (alpha * u / bound).abs();
                // ln cosh z without overflow
                let lncosh = z + (-2.0 * z).exp().ln_1p() - std::f64::consts::LN_2;
                bound * bound / alpha * lncosh
            }
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match *self {
            MonotonePart::None => 0.0,
            MonotonePart::Tanh { bound, .. } => bound,
        }
    }
}

/// User-facing description, as found in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub s: f64,
    pub a: TrigPoly,
    pub m: MonotonePart,
    #[serde(default)]
    pub b: TrigPoly,
}

impl NonlinearitySpec {
    /// `s = 3`, `a = 1 + ½ sin 2x`, `m = tanh`, `b = 0`.
    pub fn default_cubic() -> Self {
        Self {
            s: 3.0,
            a: TrigPoly(vec![
                TrigTerm {
                    j: 0,
                    c: 1.0,
                    c_sin: 0.0,
                },
                TrigTerm {
                    j: 1,
                    c: 0.0,
                    c_sin: 0.5,
                },
            ]),
            m: MonotonePart::Tanh { alpha: 1.0, bound: 1.0 },
            b: TrigPoly::default(),
        }
    }

    /// The default shape with `a` scaled by `0.02`. For fields with
    /// `|u| ≲ 5`, `f_u < 3` stays below the smallest positive symbol, so the
    /// linearization has no zero eigenvalue and solutions are isolated and
    /// unique; used for manufactured-solution studies.
    pub fn mild_cubic() -> Self {
        let mut spec = Self::default_cubic();
        for t in &mut spec.a.0 {
            t.c *= 0.02;
            t.c_sin *= 0.02;
        }
        spec
    }
}

/// Why a specification was rejected.
#[derive(Clone, Debug, PartialEq)]
pub enum Rejection {
    NonpositiveLeading { a_min: f64 },
    RatioCondition { a_min: f64, a_max: f64, s: f64 },
    NoMonotoneFloor,
    SmoothnessExponent { s: f64 },
    InvalidParameter(String),
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::NonpositiveLeading { a_min } => {
                write!(f, "NonpositiveLeading: min a(x) = {a_min} <= 0")
            }
            Rejection::RatioCondition { a_min, a_max, s } => write!(
                f,
                "RatioCondition: min a = {a_min} <= max a/(s+1) = {}",
                a_max / (s + 1.0)
            ),
            Rejection::NoMonotoneFloor => {
                write!(f, "NoMonotoneFloor: f_u vanishes at u = 0 without a monotone part")
            }
            Rejection::SmoothnessExponent { s } => write!(f, "SmoothnessExponent: s = {s} < 3"),
            Rejection::InvalidParameter(msg) => write!(f, "InvalidParameter: {msg}"),
        }
    }
}

impl Rejection {
    pub fn code(&self) -> &'static str {
        match self {
            Rejection::NonpositiveLeading { .. } => "NonpositiveLeading",
            Rejection::RatioCondition { .. } => "RatioCondition",
            Rejection::NoMonotoneFloor => "NoMonotoneFloor",
            Rejection::SmoothnessExponent { .. } => "SmoothnessExponent",
            Rejection::InvalidParameter(_) => "InvalidParameter",
        }
    }
}

/// Growth, monotonicity and coercivity constants of an accepted nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `c₀¹ = min a`.
    pub c0_lower: f64,
    /// `c₀² = max a`.
    pub c0_upper: f64,
    /// `c₁¹ = min b − sup|m|`.
    pub c1_lower: f64,
    /// `c₂¹ = max b + sup|m|`.
    pub c1_upper: f64,
    /// Certified lower bound on `inf f_u`.
    pub alpha_eff: f64,
    /// `½uf − F ≥ a₁|u|^{s+1} − a₂`.
    pub coercive_a1: f64,
    pub coercive_a2: f64,
}

/// Anything the penalized system can use as its right-hand side.
pub trait Nonlinear: Send + Sync {
    fn value(&self, x: f64, t: f64, u: f64) -> f64;
    fn derivative(&self, x: f64, t: f64, u: f64) -> f64;
    /// `F` with `∂F/∂u = f` and `F(x,t,0) = 0`.
    fn antiderivative(&self, x: f64, t: f64, u: f64) -> f64;
    /// Bandwidth multiplier of `f(u)` relative to `u`, used to size dealiasing grids.
    fn growth(&self) -> f64;
    /// Highest spatial index `j` of the explicit x-dependence, for grid padding.
    fn x_degree(&self) -> usize {
        0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Nonlinearity {
    spec: NonlinearitySpec,
    certificate: Certificate,
}

impl Nonlinearity {
    /// Builds a nonlinearity without admissibility checks. Meant for probes
    /// such as a pure power `u³` whose monotonicity floor is zero.
    pub fn unchecked(spec: NonlinearitySpec) -> Self {
        let certificate = certify(&spec);
        Self { spec, certificate }
    }

    pub fn spec(&self) -> &NonlinearitySpec {
        &self.spec
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    pub fn exponent(&self) -> f64 {
        self.spec.s
    }

    /// `∂^order f/∂u^order` at a point.
    pub fn pointwise(&self, x: f64, u: f64, order: u8) -> Result<f64> {
        if order > 3 {
            return Err(WaveError::OrderUnavailable(order));
        }
        let a = self.spec.a.eval(x);
        let s = self.spec.s;
        let r = u.abs();
        let power = match order {
            0 => a * r.powf(s - 1.0) * u,
            1 => s * a * r.powf(s - 1.0),
            2 => s * (s - 1.0) * a * r.powf(s - 2.0) * sign(u),
            // |u|^{s−3} is taken as 1 at u = 0 when s = 3 (f_uuu = 6a is constant)
            _ => s * (s - 1.0) * (s - 2.0) * a * r.powf(s - 3.0),
        };
        let offset = if order == 0 { self.spec.b.eval(x) } else { 0.0 };
        Ok(power + self.spec.m.derivative(u, order) + offset)
    }

    pub fn primitive(&self, x: f64, u: f64) -> f64 {
        let s = self.spec.s;
        self.spec.a.eval(x) * u.abs().powf(s + 1.0) / (s + 1.0)
            + self.spec.m.antiderivative(u)
            + self.spec.b.eval(x) * u
    }

    /// Sign-symmetric growth sandwich at `(x,u)`:
    /// `c₀¹|u|^s + c₁¹ ≤ f ≤ c₀²|u|^s + c₂¹` for `u ≥ 0`, and the mirrored
    /// bounds `−c₀²|u|^s + c₁¹ ≤ f ≤ −c₀¹|u|^s + c₂¹` for `u < 0`.
    pub fn sandwich_holds(&self, x: f64, u: f64) -> bool {
        let c = &self.certificate;
        let f = self.pointwise(x, u, 0).expect("order 0");
        let p = u.abs().powf(self.spec.s);
        let slack = 1e-12 * (1.0 + f.abs());
        let (lo, hi) = if u >= 0.0 {
            (c.c0_lower * p + c.c1_lower, c.c0_upper * p + c.c1_upper)
        } else {
            (-c.c0_upper * p + c.c1_lower, -c.c0_lower * p + c.c1_upper)
        };
        lo - slack <= f && f <= hi + slack
    }
}

fn sign(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Nonlinear for Nonlinearity {
    fn value(&self, x: f64, _t: f64, u: f64) -> f64 {
        let a = self.spec.a.eval(x);
        a * u.abs().powf(self.spec.s - 1.0) * u + self.spec.m.derivative(u, 0) + self.spec.b.eval(x)
    }

    fn derivative(&self, x: f64, _t: f64, u: f64) -> f64 {
        let a = self.spec.a.eval(x);
        self.spec.s * a * u.abs().powf(self.spec.s - 1.0) + self.spec.m.derivative(u, 1)
    }

    fn antiderivative(&self, x: f64, _t: f64, u: f64) -> f64 {
        self.primitive(x, u)
    }

    fn growth(&self) -> f64 {
        self.spec.s
    }

    fn x_degree(&self) -> usize {
        self.spec.a.degree().max(self.spec.b.degree()) as usize
    }
}

fn monotone_floor(s: f64, a_min: f64, m: &MonotonePart) -> f64 {
    let g = |u: f64| s * a_min * u.abs().powf(s - 1.0) + m.derivative(u, 1);
    let alpha0 = m.derivative(0.0, 1);
    if alpha0 <= 0.0 || a_min <= 0.0 {
        return g(0.0).min(0.0);
    }
    // beyond u_cap the power term alone exceeds α
    let u_cap = (alpha0 / (s * a_min)).powf(1.0 / (s - 1.0)) * 1.01 + 1e-9;
    let n = 4000;
    let h = u_cap / n as f64;
    let (mut best_i, mut best) = (0, g(0.0));
    for i in 1..=n {
        let v = g(i as f64 * h);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    // golden-section polish on the bracketing interval
    let (mut lo, mut hi) = ((best_i.max(1) - 1) as f64 * h, (best_i + 1) as f64 * h);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = hi - phi * (hi - lo);
        let x2 = lo + phi * (hi - lo);
        if g(x1) < g(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    best.min(g(0.5 * (lo + hi))) * (1.0 - 1e-9)
}

fn certify(spec: &NonlinearitySpec) -> Certificate {
    let (a_min, a_max) = spec.a.range();
    let (b_min, b_max) = if spec.b.0.is_empty() {
        (0.0, 0.0)
    } else {
        spec.b.range()
    };
    let m_sup = spec.m.sup_abs();
    let s = spec.s;
    // ½u·a|u|^{s−1}u − a|u|^{s+1}/(s+1) = a(s−1)/(2(s+1))|u|^{s+1}; the bounded part
    // and the offset contribute at least −(sup|m| + ½ max|b|)|u|.
    let kappa = a_min * (s - 1.0) / (2.0 * (s + 1.0));
    let lin = m_sup + 0.5 * b_min.abs().max(b_max.abs());
    let a1 = 0.5 * kappa;
    let a2 = if lin > 0.0 && a1 > 0.0 {
        let r = (lin / ((s + 1.0) * a1)).powf(1.0 / s);
        lin * r * s / (s + 1.0)
    } else {
        0.0
    };
    Certificate {
        c0_lower: a_min,
        c0_upper: a_max,
        c1_lower: b_min - m_sup,
        c1_upper: b_max + m_sup,
        alpha_eff: monotone_floor(s, a_min, &spec.m),
        coercive_a1: a1,
        coercive_a2: a2,
    }
}

/// Validates a specification and computes its certificate.
pub fn make_nonlinearity(spec: NonlinearitySpec) -> std::result::Result<Nonlinearity, Rejection> {
    if !spec.s.is_finite() || spec.s < 3.0 {
        return Err(Rejection::SmoothnessExponent { s: spec.s });
    }
    if spec.a.0.is_empty() {
        return Err(Rejection::InvalidParameter("a(x) has no terms".into()));
    }
    if let MonotonePart::Tanh { alpha, bound } = spec.m {
        if !(alpha > 0.0 && bound > 0.0) {
            return Err(Rejection::InvalidParameter(format!(
                "tanh part needs alpha > 0 and bound > 0 (got {alpha}, {bound})"
            )));
        }
    }
    let (a_min, a_max) = spec.a.range();
    if a_min <= 0.0 {
        return Err(Rejection::NonpositiveLeading { a_min });
    }
    if a_min <= a_max / (spec.s + 1.0) {
        return Err(Rejection::RatioCondition {
            a_min,
            a_max,
            s: spec.s,
        });
    }
    if matches!(spec.m, MonotonePart::None) {
        return Err(Rejection::NoMonotoneFloor);
    }
    let nl = Nonlinearity::unchecked(spec);
    if nl.certificate.alpha_eff <= 0.0 {
        return Err(Rejection::NoMonotoneFloor);
    }
    Ok(nl)
}

/// Pointwise `∂^order f/∂u^order` on a grid.
pub fn eval(nl: &Nonlinearity, u: &GridField, order: u8) -> Result<GridField> {
    if order > 3 {
        return Err(WaveError::OrderUnavailable(order));
    }
    let mut out = GridField::zeros(u.nx, u.nt);
    for a in 0..u.nx {
        let x = crate::spectral::grid_x(a, u.nx);
        for b in 0..u.nt {
            out.values[a * u.nt + b] = nl.pointwise(x, u.at(a, b), order)?;
        }
    }
    Ok(out)
}

/// Pointwise `F(x,u)` on a grid.
pub fn eval_f_primitive(nl: &Nonlinearity, u: &GridField) -> GridField {
    let mut out = GridField::zeros(u.nx, u.nt);
    for a in 0..u.nx {
        let x = crate::spectral::grid_x(a, u.nx);
        for b in 0..u.nt {
            out.values[a * u.nt + b] = nl.primitive(x, u.at(a, b));
        }
    }
    out
}
