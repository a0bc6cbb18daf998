//! Ensemble checks of the functional inequalities, manufactured-solution
//! studies and a priori bound monitoring.
//!
//! Where an inequality has an unknown constant the reports carry the
//! ensemble ratio distribution; boundedness is judged by comparing maxima
//! across truncations.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dalembert::{apply_box, h1_bound_ratio, solve_box, DEFAULT_RESONANT_TOL};
use crate::error::{Result, WaveError};
use crate::nonlinearity::Nonlinearity;
use crate::norms::{
    holder_estimate_with, norm_es, norm_lp, norm_lp_normalized, norm_lq, quadrant_split, sobolev_norm,
    SobolevConvention,
};
use crate::solver::{newton_solve, ContinuationTrace, MonitoredQuantities, NewtonOptions, PenalizedProblem, Sign};
use crate::spectral::{project, random_field, SpectralField, SubspaceTag, DEFAULT_OVERSAMPLE};

/// Slack allowed on the Hausdorff–Young bound for quadrature error.
pub const HY_TOL: f64 = 1e-6;

/// A deterministic family of random fields. Field `i` uses a decay drawn
/// from `[decay_min, decay_max]`; both draws depend only on `(seed, i)`,
/// and fields at different truncations are nested.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub size: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub decay_min: f64,
    pub decay_max: f64,
    pub seed: u64,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
}

fn default_oversample() -> usize {
    DEFAULT_OVERSAMPLE
}

impl EnsembleSpec {
    pub fn new(size: usize, m: usize, seed: u64) -> Self {
        Self {
            size,
            m,
            decay_min: 0.1,
            decay_max: 0.5,
            seed,
            oversample: DEFAULT_OVERSAMPLE,
        }
    }

    pub fn with_truncation(self, m: usize) -> Self {
        Self { m, ..self }
    }

    pub fn trial_seed(&self, i: usize) -> u64 {
        crate::solver::task_seed(self.seed, i as u64)
    }

    pub fn decay(&self, i: usize) -> f64 {
        let h = crate::solver::task_seed(self.seed ^ 0xD3C4, i as u64);
        let unit = (h >> 11) as f64 / (1u64 << 53) as f64;
        self.decay_min + (self.decay_max - self.decay_min) * unit
    }

    pub fn field(&self, i: usize, tag: SubspaceTag) -> SpectralField {
        random_field(self.trial_seed(i), self.m, tag, self.decay(i))
    }

    fn validate(&self) -> Result<()> {
        if self.size == 0 || self.m == 0 {
            return Err(WaveError::InvalidArgument(
                "ensemble size and M must be positive".into(),
            ));
        }
        if !(self.decay_min >= 0.0 && self.decay_max >= self.decay_min) {
            return Err(WaveError::InvalidArgument(format!(
                "decay range [{}, {}] is invalid",
                self.decay_min, self.decay_max
            )));
        }
        Ok(())
    }

    fn ratios(&self, tag: SubspaceTag, ratio: impl Fn(&SpectralField) -> Result<f64> + Sync) -> Result<Vec<f64>> {
        self.validate()?;
        (0..self.size)
            .into_par_iter()
            .map(|i| ratio(&self.field(i, tag)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
}

impl RatioSummary {
    pub fn of(ratios: &[f64]) -> Self {
        let mut sorted = ratios.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |f: f64| {
            if sorted.is_empty() {
                f64::NAN
            } else {
                sorted[((sorted.len() - 1) as f64 * f).round() as usize]
            }
        };
        Self {
            min: q(0.0),
            max: q(1.0),
            mean: ratios.iter().sum::<f64>() / ratios.len().max(1) as f64,
            q50: q(0.5),
            q90: q(0.9),
            q99: q(0.99),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub ensemble_size: usize,
    pub params: BTreeMap<String, Value>,
    pub ratios: RatioSummary,
    pub violation_count: usize,
    #[serde(skip)]
    pub trials: Vec<f64>,
}

impl InequalityReport {
    fn new(name: &str, ens: &EnsembleSpec, trials: Vec<f64>, violation: impl Fn(f64) -> bool) -> Self {
        let mut params = BTreeMap::new();
        params.insert("M".to_string(), Value::from(ens.m));
        params.insert("seed".to_string(), Value::from(ens.seed));
        params.insert("decay_min".to_string(), Value::from(ens.decay_min));
        params.insert("decay_max".to_string(), Value::from(ens.decay_max));
        Self {
            name: name.to_string(),
            ensemble_size: trials.len(),
            params,
            ratios: RatioSummary::of(&trials),
            violation_count: trials.iter().filter(|&&r| !r.is_finite() || violation(r)).count(),
            trials,
        }
    }

    fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    /// Per-trial ratios as `trial,ratio`.
    pub fn write_trials_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trial", "ratio"])?;
        for (i, r) in self.trials.iter().enumerate() {
            w.write_record([i.to_string(), format!("{r:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `s(p) = (p−2)/(p−1)`.
pub fn gn_exponent(p: f64) -> f64 {
    (p - 2.0) / (p - 1.0)
}

/// `p(s) = (2−s)/(1−s)`.
pub fn embedding_exponent(s: f64) -> f64 {
    (2.0 - s) / (1.0 - s)
}

/// `‖u‖_{L^p} / (‖u‖_{L²}^{1−s}‖u‖_{E¹}^{s})` with `s = s(p)`.
pub fn gn_ratio(u: &SpectralField, p: f64, oversample: usize) -> Result<f64> {
    let s = gn_exponent(p);
    let e1 = norm_es(u, 1.0)?;
    let l2 = norm_lp(u, 2.0, oversample);
    Ok(norm_lp(u, p, oversample) / (l2.powf(1.0 - s) * e1.powf(s)))
}

/// `‖u‖_{L^p} / ‖u‖_{E^s}` with `p = p(s)`.
pub fn embedding_ratio(u: &SpectralField, s: f64, oversample: usize) -> Result<f64> {
    Ok(norm_lp(u, embedding_exponent(s), oversample) / norm_es(u, s)?)
}

pub fn check_gn(ens: &EnsembleSpec, p: f64) -> Result<InequalityReport> {
    if !(p > 2.0) {
        return Err(WaveError::InvalidArgument(format!(
            "Gagliardo-Nirenberg needs p > 2, got {p}"
        )));
    }
    let trials = ens.ratios(SubspaceTag::Eperp, |u| gn_ratio(u, p, ens.oversample))?;
    Ok(InequalityReport::new("gagliardo_nirenberg", ens, trials, |_| false)
        .param("p", p)
        .param("s", gn_exponent(p)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    /// Fields are supported on `T < 2|j|+|k| ≤ 2T`.
    pub t: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub report: InequalityReport,
    pub tail: Vec<TailRow>,
    pub tail_strictly_decreasing: bool,
}

/// Ensemble of `‖u‖_{L^p}/‖u‖_{E^s}` plus the same ratio over flat-spectrum
/// fields supported on the bands `T < 2|j|+|k| ≤ 2T`.
pub fn check_embedding(ens: &EnsembleSpec, s: f64, tails: &[usize]) -> Result<EmbeddingReport> {
    if !(s > 0.0 && s < 1.0) {
        return Err(WaveError::InvalidArgument(format!(
            "embedding needs 0 < s < 1, got {s}"
        )));
    }
    let trials = ens.ratios(SubspaceTag::Eperp, |u| embedding_ratio(u, s, ens.oversample))?;
    let report = InequalityReport::new("embedding", ens, trials, |_| false)
        .param("s", s)
        .param("p", embedding_exponent(s));
    let mut tail = Vec::with_capacity(tails.len());
    for &t in tails {
        if t == 0 {
            return Err(WaveError::InvalidArgument("tail threshold T must be positive".into()));
        }
        let band = EnsembleSpec {
            m: 2 * t,
            decay_min: 0.0,
            decay_max: 0.0,
            ..*ens
        };
        let ratios = band.ratios(SubspaceTag::Eperp, |u| {
            let cut = u.map(|md, c| {
                if md.weight() > t {
                    c
                } else {
                    num_complex::Complex64::new(0.0, 0.0)
                }
            });
            embedding_ratio(&cut, s, ens.oversample)
        })?;
        let sum = RatioSummary::of(&ratios);
        tail.push(TailRow {
            t,
            max_ratio: sum.max,
            mean_ratio: sum.mean,
        });
    }
    let tail_strictly_decreasing = tail.windows(2).all(|w| w[1].max_ratio < w[0].max_ratio);
    Ok(EmbeddingReport {
        report,
        tail,
        tail_strictly_decreasing,
    })
}

/// `‖û‖_{ℓ^q}/‖u‖_{L^p}` with the measure-normalized `L^p`; a violation is
/// a ratio above `1 + HY_TOL`.
pub fn hausdorff_young_ratio(u: &SpectralField, p: f64, oversample: usize) -> f64 {
    let q = p / (p - 1.0);
    norm_lq(u, q) / norm_lp_normalized(u, p, oversample)
}

pub fn check_hausdorff_young(ens: &EnsembleSpec, p: f64) -> Result<InequalityReport> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(WaveError::InvalidArgument(format!(
            "Hausdorff-Young needs 1 < p <= 2, got {p}"
        )));
    }
    let trials = ens.ratios(SubspaceTag::All, |u| Ok(hausdorff_young_ratio(u, p, ens.oversample)))?;
    Ok(
        InequalityReport::new("hausdorff_young", ens, trials, |r| r > 1.0 + HY_TOL)
            .param("p", p)
            .param("q", p / (p - 1.0))
            .param("tolerance", HY_TOL),
    )
}

/// Largest quadrant `H^{γ′}` norm (ℓ¹ weights) over the block Hölder proxy,
/// and the relative defect of `‖u‖² = Σ_quadrants ‖u^{±±}‖²`.
pub fn holder_sobolev_ratio(u: &SpectralField, gamma: f64, gamma_prime: f64, oversample: usize) -> (f64, f64) {
    let h = holder_estimate_with(u, gamma, oversample);
    let total = sobolev_norm(u, gamma_prime, SobolevConvention::Ell1);
    let mut worst: f64 = 0.0;
    let mut sum_sq = 0.0;
    for q in quadrant_split(u) {
        let n = sobolev_norm(&q, gamma_prime, SobolevConvention::Ell1);
        worst = worst.max(n);
        sum_sq += n * n;
    }
    let defect = if total == 0.0 {
        0.0
    } else {
        (sum_sq - total * total).abs() / (total * total)
    };
    (worst / h, defect)
}

pub fn check_holder_to_sobolev(ens: &EnsembleSpec, gamma: f64, gamma_prime: f64) -> Result<InequalityReport> {
    if !(0.0 < gamma_prime && gamma_prime < gamma && gamma < 1.0) {
        return Err(WaveError::InvalidArgument(format!(
            "need 0 < gamma' < gamma < 1, got gamma={gamma} gamma'={gamma_prime}"
        )));
    }
    ens.validate()?;
    let pairs: Vec<(f64, f64)> = (0..ens.size)
        .into_par_iter()
        .map(|i| holder_sobolev_ratio(&ens.field(i, SubspaceTag::All), gamma, gamma_prime, ens.oversample))
        .collect();
    let defect = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    let identity_failures = pairs.iter().filter(|p| p.1 > 1e-12).count();
    let trials = pairs.into_iter().map(|p| p.0).collect();
    let mut rep = InequalityReport::new("holder_to_sobolev", ens, trials, |_| false)
        .param("gamma", gamma)
        .param("gamma_prime", gamma_prime)
        .param("quadrant_identity_max_defect", defect);
    rep.violation_count += identity_failures;
    Ok(rep)
}

/// `holder_estimate(□⁻¹f, γ)/‖f̂‖_{ℓ^q}` with `q = p/(p−1)` over `E⊥` fields.
pub fn check_regularity(ens: &EnsembleSpec, p: f64, gamma: f64) -> Result<InequalityReport> {
    if !(p > 1.0) || !(gamma > 0.0) {
        return Err(WaveError::InvalidArgument(format!(
            "need p > 1 and gamma > 0, got p={p} gamma={gamma}"
        )));
    }
    let q = p / (p - 1.0);
    let trials = ens.ratios(SubspaceTag::Eperp, |f| {
        let w = solve_box(f, DEFAULT_RESONANT_TOL)?.w;
        Ok(holder_estimate_with(&w, gamma, ens.oversample) / norm_lq(f, q))
    })?;
    Ok(InequalityReport::new("regularity", ens, trials, |_| false)
        .param("p", p)
        .param("q", q)
        .param("gamma", gamma)
        .param("gamma_limit", 1.0 - 1.0 / p)
        .param("in_admissible_range", gamma < 1.0 - 1.0 / p && p <= 2.0))
}

/// `‖□⁻¹f‖_{H¹}/‖f̂‖_{ℓ²}`; the sharp constant is 1.
pub fn check_h1_bound(ens: &EnsembleSpec) -> Result<InequalityReport> {
    let trials = ens.ratios(SubspaceTag::Eperp, h1_bound_ratio)?;
    Ok(InequalityReport::new("h1_bound", ens, trials, |r| r > 1.0 + 1e-12).param("constant", 1.0))
}

/// Relative error of `□(□⁻¹f) = P⊥f`.
pub fn check_box_roundtrip(ens: &EnsembleSpec) -> Result<InequalityReport> {
    let trials = ens.ratios(SubspaceTag::Eperp, |f| {
        let w = solve_box(f, DEFAULT_RESONANT_TOL)?.w;
        let back = apply_box(&w);
        Ok((&back - &project(f, SubspaceTag::Eperp)).l2_norm() / f.l2_norm())
    })?;
    Ok(InequalityReport::new("box_roundtrip", ens, trials, |r| r > 1e-12).param("tolerance", 1e-12))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmsOptions {
    pub decay: f64,
    #[serde(rename = "M_list")]
    pub m_list: Vec<usize>,
    pub beta: f64,
    #[serde(default = "default_sigma")]
    pub sigma: Sign,
    pub seed: u64,
    #[serde(default)]
    pub newton: NewtonOptions,
}

fn default_sigma() -> Sign {
    Sign::Plus
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmsRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub error: f64,
    pub residual_norm: f64,
    pub newton_iters: usize,
    pub converged: bool,
    pub i_value: f64,
    pub identity_gap: f64,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmsTable {
    pub rows: Vec<MmsRow>,
    pub target_norm: f64,
}

impl MmsTable {
    /// `error[i+1]/error[i]` between consecutive rows.
    pub fn error_ratios(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[1].error / w[0].error).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "M",
            "error",
            "residual_norm",
            "newton_iters",
            "converged",
            "I_value",
            "identity_gap",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.m.to_string(),
                format!("{:.17e}", r.error),
                format!("{:.17e}", r.residual_norm),
                r.newton_iters.to_string(),
                r.converged.to_string(),
                format!("{:.17e}", r.i_value),
                format!("{:.17e}", r.identity_gap),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Manufactured-solution study. The target `u*` has `|û| = e^{−d(2|j|+|k|)}`
/// with random phases at the largest `M`; the forcing makes it an exact root
/// there. Each level is truncated from that forcing and solved from zero.
pub fn mms_run(nl: &Nonlinearity, opts: &MmsOptions) -> Result<MmsTable> {
    let m_max = *opts
        .m_list
        .last()
        .ok_or_else(|| WaveError::InvalidArgument("M list is empty".into()))?;
    if opts.m_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(WaveError::InvalidArgument("M list must be strictly increasing".into()));
    }
    let target = random_field(opts.seed, m_max, SubspaceTag::All, opts.decay);
    let top = PenalizedProblem::new(m_max, opts.beta, opts.sigma, nl.clone())?;
    let forcing = top.unforced_residual(&target);
    let mut rows = Vec::with_capacity(opts.m_list.len());
    for &m in &opts.m_list {
        let p = top.with_truncation(m).with_forcing(forcing.resized(m))?;
        let row = match newton_solve(&p, &SpectralField::zeros(m), &opts.newton) {
            Ok(sol) => MmsRow {
                m,
                error: (&sol.u.resized(m_max) - &target).l2_norm(),
                residual_norm: sol.residual_norm,
                newton_iters: sol.newton_iters,
                converged: true,
                i_value: sol.i_value,
                identity_gap: p.critical_identity_gap(&sol.u),
                failure: None,
            },
            Err(WaveError::NoConvergence { best, .. }) => MmsRow {
                m,
                error: (&best.u.resized(m_max) - &target).l2_norm(),
                residual_norm: best.residual_norm,
                newton_iters: best.newton_iters,
                converged: false,
                i_value: best.i_value,
                identity_gap: p.critical_identity_gap(&best.u),
                failure: Some("no_convergence".into()),
            },
            Err(other) => MmsRow {
                m,
                error: f64::NAN,
                residual_norm: f64::NAN,
                newton_iters: 0,
                converged: false,
                i_value: f64::NAN,
                identity_gap: f64::NAN,
                failure: Some(other.to_string()),
            },
        };
        rows.push(row);
    }
    Ok(MmsTable {
        rows,
        target_norm: target.l2_norm(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantityRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
    /// `max/min`; 1 for an identically zero quantity.
    pub ratio: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub rows: usize,
    pub beta_max: f64,
    pub beta_min: f64,
    pub bound: f64,
    pub quantities: Vec<QuantityRange>,
    pub all_within: bool,
}

pub const DEFAULT_APRIORI_BOUND: f64 = 10.0;

/// Spread of each monitored quantity over the β range of a trace.
pub fn apriori_monitor(trace: &ContinuationTrace, bound: f64) -> Result<AprioriReport> {
    if trace.rows.is_empty() {
        return Err(WaveError::InvalidArgument("continuation trace is empty".into()));
    }
    let quantities: Vec<QuantityRange> = MonitoredQuantities::NAMES
        .iter()
        .enumerate()
        .map(|(q, name)| {
            let vals: Vec<f64> = trace.rows.iter().map(|r| r.monitored.values()[q]).collect();
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let ratio = if max == 0.0 { 1.0 } else { max / min };
            QuantityRange {
                name: name.to_string(),
                min,
                max,
                ratio,
                flagged: !(ratio <= bound),
            }
        })
        .collect();
    let betas = trace.rows.iter().map(|r| r.beta);
    Ok(AprioriReport {
        rows: trace.rows.len(),
        beta_max: betas.clone().fold(f64::NEG_INFINITY, f64::max),
        beta_min: betas.fold(f64::INFINITY, f64::min),
        bound,
        all_within: quantities.iter().all(|q| !q.flagged),
        quantities,
    })
}
