//! C ABI over the `wavetorus` crate.
//!
//! Objects are opaque heap handles released with their `*_free` function.
//! Every fallible call returns a [`WtStatus`]; on failure the message is
//! available from [`wt_last_error`] on the same thread until the next call.
//! Strings returned through out-parameters are released with
//! [`wt_string_free`].

// `!(x > 0.0)` style checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use num_complex::Complex64;
use wavetorus::dalembert::{solve_box, DEFAULT_RESONANT_TOL};
use wavetorus::nonlinearity::{make_nonlinearity, Nonlinearity, NonlinearitySpec};
use wavetorus::norms;
use wavetorus::solver::{newton_solve, NewtonOptions, PenalizedProblem, Sign, SolutionState};
use wavetorus::spectral::{field_from_json, field_to_json, random_field};
use wavetorus::{ModeIndex, SpectralField, SubspaceTag, WaveError};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidField = 3,
    Rejected = 4,
    NoConvergence = 5,
    SingularJacobian = 6,
    ResonantMass = 7,
    Config = 8,
    Io = 9,
    Panic = 10,
    Other = 11,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WtSubspace {
    All = 0,
    Kernel = 1,
    Eplus = 2,
    Eminus = 3,
    Eperp = 4,
}

fn subspace_of(v: c_int) -> Result<SubspaceTag, Fail> {
    Ok(match v {
        0 => SubspaceTag::All,
        1 => SubspaceTag::Kernel,
        2 => SubspaceTag::Eplus,
        3 => SubspaceTag::Eminus,
        4 => SubspaceTag::Eperp,
        _ => return Err(Fail(WtStatus::InvalidArgument, format!("unknown subspace {v}"))),
    })
}

const NORMS: [WtNorm; 9] = [
    WtNorm::E,
    WtNorm::Es,
    WtNorm::Lp,
    WtNorm::LpNormalized,
    WtNorm::Lq,
    WtNorm::C0,
    WtNorm::Holder,
    WtNorm::SobolevAniso,
    WtNorm::SobolevEll1,
];

/// Norm selector (as `int`) for [`wt_field_norm`]; `param` is the exponent where one applies.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WtNorm {
    /// Energy norm; no parameter.
    E = 0,
    /// `E^s` with `s = param`; the field must lie in `E⊥`.
    Es = 1,
    /// `L^p` over `Q`, `p = param`.
    Lp = 2,
    /// `L^p` w.r.t. the normalized measure.
    LpNormalized = 3,
    /// Coefficient `ℓ^q`, `q = param`.
    Lq = 4,
    /// Grid maximum.
    C0 = 5,
    /// Dyadic Hölder proxy with `γ = param`.
    Holder = 6,
    /// `H^s` with anisotropic weights.
    SobolevAniso = 7,
    /// `H^s` with `(2|j|+|k|)²` weights.
    SobolevEll1 = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WtPreset {
    DefaultCubic = 0,
    MildCubic = 1,
}

pub struct WtField {
    inner: SpectralField,
}

pub struct WtProblem {
    inner: PenalizedProblem<Nonlinearity>,
}

pub struct WtSolution {
    inner: SolutionState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &WaveError) -> WtStatus {
    match e {
        WaveError::InvalidArgument(_) | WaveError::GridTooCoarse { .. } | WaveError::OrderUnavailable(_) => {
            WtStatus::InvalidArgument
        }
        WaveError::InvalidField(_) | WaveError::NotInKernel { .. } | WaveError::NotInEperp { .. } => {
            WtStatus::InvalidField
        }
        WaveError::Json(_) => WtStatus::InvalidField,
        WaveError::ResonantMass { .. } => WtStatus::ResonantMass,
        WaveError::Rejected(_) => WtStatus::Rejected,
        WaveError::NoConvergence { .. } => WtStatus::NoConvergence,
        WaveError::SingularJacobian { .. } => WtStatus::SingularJacobian,
        WaveError::Schedule(_) => WtStatus::Config,
        WaveError::Io(_) | WaveError::Csv(_) => WtStatus::Io,
        WaveError::StallAt { .. } => WtStatus::Other,
    }
}

struct Fail(WtStatus, String);

impl From<WaveError> for Fail {
    fn from(e: WaveError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(WtStatus::NullPointer, format!("{what} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> WtStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => WtStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            WtStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(WtStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = CString::new(s)
        .map_err(|_| Fail(WtStatus::Other, "string contains a nul byte".into()))?
        .into_raw();
    Ok(())
}

unsafe fn put_value<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = v;
    Ok(())
}

/// Message of the last failure on this thread, or null. Owned by the library.
#[no_mangle]
pub extern "C" fn wt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn wt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn wt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wt_field_zeros(m: usize, out: *mut *mut WtField) -> WtStatus {
    guard(|| {
        if m == 0 {
            return Err(Fail(WtStatus::InvalidArgument, "truncation must be positive".into()));
        }
        put(
            out,
            WtField {
                inner: SpectralField::zeros(m),
            },
        )
    })
}

/// Random real field with `|û| = e^{−decay(2|j|+|k|)}` on `subspace`
/// (a [`WtSubspace`] value).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wt_field_random(
    seed: u64,
    m: usize,
    subspace: c_int,
    decay: f64,
    out: *mut *mut WtField,
) -> WtStatus {
    guard(|| {
        if m == 0 || !(decay >= 0.0) {
            return Err(Fail(WtStatus::InvalidArgument, "need M > 0 and decay >= 0".into()));
        }
        put(
            out,
            WtField {
                inner: random_field(seed, m, subspace_of(subspace)?, decay),
            },
        )
    })
}

/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wt_field_from_json(json: *const c_char, out: *mut *mut WtField) -> WtStatus {
    guard(|| {
        let u = field_from_json(text(json, "json")?)?;
        put(out, WtField { inner: u })
    })
}

/// # Safety
/// `field` must be a live handle; `out` receives a string for [`wt_string_free`].
#[no_mangle]
pub unsafe extern "C" fn wt_field_to_json(field: *const WtField, out: *mut *mut c_char) -> WtStatus {
    guard(|| {
        let s = field_to_json(&borrow(field, "field")?.inner)?;
        put_string(out, s)
    })
}

/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wt_field_free(field: *mut WtField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Truncation `M`, or 0 for a null handle.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wt_field_truncation(field: *const WtField) -> usize {
    field.as_ref().map_or(0, |f| f.inner.truncation())
}

/// Coefficient of mode `(j, k)`; zero outside the lattice.
///
/// # Safety
/// `field` must be a live handle; `re` and `im` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wt_field_get(
    field: *const WtField,
    j: c_int,
    k: c_int,
    re: *mut f64,
    im: *mut f64,
) -> WtStatus {
    guard(|| {
        let c = borrow(field, "field")?.inner.get(ModeIndex::new(j, k));
        put_value(re, c.re)?;
        put_value(im, c.im)
    })
}

/// Sets `(j, k)` and its conjugate partner so the field stays real.
///
/// # Safety
/// `field` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn wt_field_set_pair(field: *mut WtField, j: c_int, k: c_int, re: f64, im: f64) -> WtStatus {
    guard(|| {
        let f = borrow_mut(field, "field")?;
        let mode = ModeIndex::new(j, k);
        if !f.inner.contains(mode) {
            return Err(Fail(
                WtStatus::InvalidArgument,
                format!("mode {mode} is outside the lattice"),
            ));
        }
        if mode == ModeIndex::ZERO && im != 0.0 {
            return Err(Fail(WtStatus::InvalidArgument, "mode (0,0) must be real".into()));
        }
        f.inner.set_pair(mode, Complex64::new(re, im));
        Ok(())
    })
}

/// # Safety
/// `field` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wt_field_norm(field: *const WtField, norm: c_int, param: f64, out: *mut f64) -> WtStatus {
    guard(|| {
        let u = &borrow(field, "field")?.inner;
        let norm = usize::try_from(norm)
            .ok()
            .and_then(|i| NORMS.get(i).copied())
            .ok_or_else(|| Fail(WtStatus::InvalidArgument, format!("unknown norm {norm}")))?;
        let os = wavetorus::spectral::DEFAULT_OVERSAMPLE;
        let v = match norm {
            WtNorm::E => norms::norm_e(u),
            WtNorm::Es => norms::norm_es(u, param)?,
            WtNorm::Lp | WtNorm::LpNormalized | WtNorm::Lq if !(param >= 1.0) => {
                return Err(Fail(
                    WtStatus::InvalidArgument,
                    format!("exponent must be >= 1, got {param}"),
                ))
            }
            WtNorm::Lp => norms::norm_lp(u, param, os),
            WtNorm::LpNormalized => norms::norm_lp_normalized(u, param, os),
            WtNorm::Lq => norms::norm_lq(u, param),
            WtNorm::C0 => norms::grid_max(u, os),
            WtNorm::Holder => norms::holder_estimate(u, param),
            WtNorm::SobolevAniso => norms::sobolev_norm(u, param, norms::SobolevConvention::Aniso),
            WtNorm::SobolevEll1 => norms::sobolev_norm(u, param, norms::SobolevConvention::Ell1),
        };
        put_value(out, v)
    })
}

/// `w = □⁻¹f` on `E⊥`; fails with `ResonantMass` when `f` has kernel content.
///
/// # Safety
/// `f` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wt_solve_box(f: *const WtField, out: *mut *mut WtField) -> WtStatus {
    guard(|| {
        let w = solve_box(&borrow(f, "f")?.inner, DEFAULT_RESONANT_TOL)?.w;
        put(out, WtField { inner: w })
    })
}

fn sign_of(sigma: c_int) -> Result<Sign, Fail> {
    Sign::try_from(sigma).map_err(|m| Fail(WtStatus::InvalidArgument, m))
}

/// `sigma` is 1 or −1; `preset` a [`WtPreset`] value.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wt_problem_new(
    m: usize,
    beta: f64,
    sigma: c_int,
    preset: c_int,
    out: *mut *mut WtProblem,
) -> WtStatus {
    guard(|| {
        let spec = match preset {
            p if p == WtPreset::DefaultCubic as c_int => NonlinearitySpec::default_cubic(),
            p if p == WtPreset::MildCubic as c_int => NonlinearitySpec::mild_cubic(),
            _ => return Err(Fail(WtStatus::InvalidArgument, format!("unknown preset {preset}"))),
        };
        let nl = make_nonlinearity(spec).map_err(WaveError::Rejected)?;
        put(
            out,
            WtProblem {
                inner: PenalizedProblem::new(m, beta, sign_of(sigma)?, nl)?,
            },
        )
    })
}

/// Builds a problem from a JSON nonlinearity description
/// (`{"s":…, "a":[…], "m":{…}, "b":[…]}`).
///
/// # Safety
/// `spec_json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wt_problem_new_with_spec(
    m: usize,
    beta: f64,
    sigma: c_int,
    spec_json: *const c_char,
    out: *mut *mut WtProblem,
) -> WtStatus {
    guard(|| {
        let spec: NonlinearitySpec = serde_json::from_str(text(spec_json, "spec_json")?)
            .map_err(|e| Fail(WtStatus::InvalidArgument, format!("nonlinearity: {e}")))?;
        let nl = make_nonlinearity(spec).map_err(WaveError::Rejected)?;
        put(
            out,
            WtProblem {
                inner: PenalizedProblem::new(m, beta, sign_of(sigma)?, nl)?,
            },
        )
    })
}

/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wt_problem_free(problem: *mut WtProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Sets the forcing so that `target` is an exact solution.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn wt_problem_manufacture(problem: *mut WtProblem, target: *const WtField) -> WtStatus {
    guard(|| {
        let p = borrow_mut(problem, "problem")?;
        let t = borrow(target, "target")?.inner.resized(p.inner.truncation());
        let g = p.inner.unforced_residual(&t);
        p.inner = p.inner.clone().with_forcing(g)?;
        Ok(())
    })
}

/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn wt_problem_functional(
    problem: *const WtProblem,
    u: *const WtField,
    out: *mut f64,
) -> WtStatus {
    guard(|| {
        let p = &borrow(problem, "problem")?.inner;
        put_value(out, p.functional_i(&borrow(u, "u")?.inner.resized(p.truncation())))
    })
}

/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn wt_problem_residual_norm(
    problem: *const WtProblem,
    u: *const WtField,
    out: *mut f64,
) -> WtStatus {
    guard(|| {
        let p = &borrow(problem, "problem")?.inner;
        put_value(out, p.residual_norm(&borrow(u, "u")?.inner.resized(p.truncation())))
    })
}

/// Newton from `seed` (null for zero). On `NoConvergence` the best iterate
/// is still returned through `out`.
///
/// # Safety
/// `problem` must be live, `seed` null or live, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn wt_newton_solve(
    problem: *const WtProblem,
    seed: *const WtField,
    tol: f64,
    max_iter: usize,
    out: *mut *mut WtSolution,
) -> WtStatus {
    guard(|| {
        let p = &borrow(problem, "problem")?.inner;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let start = match seed.as_ref() {
            Some(f) => f.inner.resized(p.truncation()),
            None => SpectralField::zeros(p.truncation()),
        };
        let opts = NewtonOptions {
            tol,
            max_iter,
            ..Default::default()
        };
        if !(tol > 0.0) || max_iter == 0 {
            return Err(Fail(
                WtStatus::InvalidArgument,
                "tol and max_iter must be positive".into(),
            ));
        }
        match newton_solve(p, &start, &opts) {
            Ok(s) => put(out, WtSolution { inner: s }),
            Err(WaveError::NoConvergence {
                iters,
                residual,
                best,
                trace,
            }) => {
                put(out, WtSolution { inner: (*best).clone() })?;
                Err(WaveError::NoConvergence {
                    iters,
                    residual,
                    best,
                    trace,
                }
                .into())
            }
            Err(e) => Err(e.into()),
        }
    })
}

/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wt_solution_free(solution: *mut WtSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Copies the solution field into a new handle.
///
/// # Safety
/// `solution` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn wt_solution_field(solution: *const WtSolution, out: *mut *mut WtField) -> WtStatus {
    guard(|| {
        put(
            out,
            WtField {
                inner: borrow(solution, "solution")?.inner.u.clone(),
            },
        )
    })
}

/// # Safety
/// `solution` must be live; any out pointer may be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn wt_solution_stats(
    solution: *const WtSolution,
    residual_norm: *mut f64,
    i_value: *mut f64,
    newton_iters: *mut usize,
) -> WtStatus {
    guard(|| {
        let s = &borrow(solution, "solution")?.inner;
        if let Some(r) = residual_norm.as_mut() {
            *r = s.residual_norm;
        }
        if let Some(i) = i_value.as_mut() {
            *i = s.i_value;
        }
        if let Some(n) = newton_iters.as_mut() {
            *n = s.newton_iters;
        }
        Ok(())
    })
}

/// Runs a TOML run configuration as the command-line tool would, writing
/// artifacts into `out_dir`. `exit_code` receives the tool's exit status;
/// the call itself fails only for unusable arguments or a configuration error.
///
/// # Safety
/// Strings must be nul-terminated and `exit_code` valid.
#[no_mangle]
pub unsafe extern "C" fn wt_run_config(
    config_toml: *const c_char,
    out_dir: *const c_char,
    exit_code: *mut c_int,
) -> WtStatus {
    guard(|| {
        let toml = text(config_toml, "config_toml")?;
        let dir = text(out_dir, "out_dir")?;
        if exit_code.is_null() {
            return Err(null("exit_code"));
        }
        let cfg = match wavetorus::cli::parse_config(toml) {
            Ok(c) => c,
            Err(e) => {
                *exit_code = wavetorus::cli::EXIT_CONFIG;
                return Err(Fail(WtStatus::Config, e.to_string()));
            }
        };
        let outcome = wavetorus::cli::run(&cfg, toml, Path::new(dir), None);
        *exit_code = outcome.exit_code;
        Ok(())
    })
}
