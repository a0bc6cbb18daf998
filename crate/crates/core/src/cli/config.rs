use std::fmt;
use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::nonlinearity::{make_nonlinearity, Nonlinearity, NonlinearitySpec};
use crate::solver::{BetaSchedule, NewtonOptions, PenalizedProblem, Sign};
use crate::spectral::DEFAULT_OVERSAMPLE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Continue,
    Multi,
    Verify,
    Norms,
    Mms,
    Linking,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Continue => "continue",
            Command::Multi => "multi",
            Command::Verify => "verify",
            Command::Norms => "norms",
            Command::Mms => "mms",
            Command::Linking => "linking",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Hy,
    Gn,
    Embedding,
    Holder,
    H1,
    Box,
    Regularity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    DefaultCubic,
    MildCubic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    #[serde(rename = "M")]
    pub m: usize,
    pub beta: f64,
    pub sigma: Sign,
    pub preset: Option<Preset>,
    pub nonlinearity: Option<NonlinearitySpec>,
    pub oversample: usize,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            m: 24,
            beta: 1e-3,
            sigma: Sign::Plus,
            preset: None,
            nonlinearity: None,
            oversample: DEFAULT_OVERSAMPLE,
        }
    }
}

impl ProblemConfig {
    pub fn spec(&self) -> NonlinearitySpec {
        match (&self.nonlinearity, self.preset) {
            (Some(spec), _) => spec.clone(),
            (None, Some(Preset::MildCubic)) => NonlinearitySpec::mild_cubic(),
            _ => NonlinearitySpec::default_cubic(),
        }
    }

    pub fn build(&self) -> crate::Result<PenalizedProblem<Nonlinearity>> {
        let nl = make_nonlinearity(self.spec()).map_err(crate::WaveError::Rejected)?;
        Ok(PenalizedProblem::new(self.m, self.beta, self.sigma, nl)?.with_oversample(self.oversample))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    /// Initial iterate; zero when absent.
    pub initial: Option<PathBuf>,
    /// Decay of a random manufactured target; the forcing is chosen to make it a root.
    pub manufactured_decay: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinueConfig {
    /// Starting field; when absent a multi-seed search at the first β picks
    /// the solution with the largest kernel mass.
    pub initial: Option<PathBuf>,
    pub search_seeds: usize,
    pub apriori_bound: f64,
}

impl Default for ContinueConfig {
    fn default() -> Self {
        Self {
            initial: None,
            search_seeds: 32,
            apriori_bound: crate::verify::DEFAULT_APRIORI_BOUND,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub n_seeds: usize,
    pub dedup_threshold: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            n_seeds: 32,
            dedup_threshold: 0.99,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub suite: Option<Suite>,
    pub size: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub decay_min: f64,
    pub decay_max: f64,
    pub oversample: usize,
    /// Exponents for `hy`, `gn` and `regularity`; suite defaults when absent.
    pub p: Option<Vec<f64>>,
    /// Smoothness for `embedding`.
    pub s: Option<Vec<f64>>,
    pub gamma: Option<f64>,
    pub gamma_prime: Option<f64>,
    /// Tail thresholds `T` for `embedding`.
    pub tails: Vec<usize>,
    /// Also run the ensemble at `2M` and report the growth of the maximum.
    pub double_m: bool,
    pub max_growth: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            suite: None,
            size: 1000,
            m: 32,
            decay_min: 0.1,
            decay_max: 0.5,
            oversample: DEFAULT_OVERSAMPLE,
            p: None,
            s: None,
            gamma: None,
            gamma_prime: None,
            tails: vec![8, 16, 32, 64],
            double_m: true,
            max_growth: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormsConfig {
    /// Field to measure; a random field of the problem's `M` when absent.
    pub field: Option<PathBuf>,
    pub decay: f64,
}

impl Default for NormsConfig {
    fn default() -> Self {
        Self {
            field: None,
            decay: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MmsConfig {
    pub decay: f64,
    #[serde(rename = "M_list")]
    pub m_list: Vec<usize>,
}

impl Default for MmsConfig {
    fn default() -> Self {
        Self {
            decay: 0.5,
            m_list: vec![8, 12, 16, 20, 24],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkingConfig {
    pub l_values: Vec<usize>,
    pub rhos: Vec<f64>,
    pub n_starts: usize,
    pub n_sphere_samples: usize,
    pub max_ascent_iters: usize,
}

impl Default for LinkingConfig {
    fn default() -> Self {
        let d = crate::solver::LinkingOptions::default();
        Self {
            l_values: vec![4, 8, 12, 16],
            rhos: d.rhos,
            n_starts: d.n_starts,
            n_sphere_samples: d.n_sphere_samples,
            max_ascent_iters: d.max_ascent_iters,
        }
    }
}

/// A parsed configuration file. Sections not used by the command are
/// accepted but ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub newton: NewtonOptions,
    pub schedule: Option<BetaSchedule>,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default, rename = "continue")]
    pub continuation: ContinueConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub norms: NormsConfig,
    #[serde(default)]
    pub mms: MmsConfig,
    #[serde(default)]
    pub linking: LinkingConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldError {
    /// Dotted path to the offending key; empty for the document root.
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParseError {
    pub errors: Vec<FieldError>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.errors.iter().map(|e| e.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

impl std::error::Error for ParseError {}

fn err(path: &str, message: impl Into<String>) -> FieldError {
    FieldError {
        path: path.into(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn needs_seed(&self) -> bool {
        match self.command {
            Command::Solve => self.solve.manufactured_decay.is_some(),
            Command::Norms => self.norms.field.is_none(),
            Command::Continue => self.continuation.initial.is_none(),
            Command::Multi | Command::Verify | Command::Mms | Command::Linking => true,
        }
    }

    /// Seed after validation; randomized commands always have one.
    pub fn seed_or_zero(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Cross-field checks that serde cannot express.
    pub fn validate(&self) -> Result<(), ParseError> {
        let mut errors = Vec::new();
        if self.needs_seed() && self.seed.is_none() {
            errors.push(err("seed", format!("required for the {} command", self.command.name())));
        }
        let p = &self.problem;
        if p.m == 0 {
            errors.push(err("problem.M", "must be positive"));
        }
        if !(p.beta > 0.0 && p.beta.is_finite()) {
            errors.push(err("problem.beta", "must be positive"));
        }
        if p.preset.is_some() && p.nonlinearity.is_some() {
            errors.push(err("problem", "give either preset or nonlinearity, not both"));
        }
        if p.oversample < 2 {
            errors.push(err("problem.oversample", "must be at least 2"));
        }
        if let Err(rej) = make_nonlinearity(p.spec()) {
            errors.push(err("problem.nonlinearity", format!("rejected: {rej}")));
        }
        if !(self.newton.tol > 0.0) || self.newton.max_iter == 0 {
            errors.push(err("newton", "tol and max_iter must be positive"));
        }
        match self.command {
            Command::Continue => match &self.schedule {
                None => errors.push(err("schedule", "required for the continue command")),
                Some(s) => {
                    if let Err(e) = s.validate() {
                        errors.push(err("schedule", e.to_string()));
                    }
                }
            },
            Command::Verify => {
                let v = &self.verify;
                if v.size == 0 || v.m == 0 {
                    errors.push(err("verify", "size and M must be positive"));
                }
                if !(v.decay_min >= 0.0 && v.decay_max >= v.decay_min) {
                    errors.push(err("verify.decay_min", "need 0 <= decay_min <= decay_max"));
                }
            }
            Command::Mms => {
                if self.mms.m_list.is_empty() || self.mms.m_list.windows(2).any(|w| w[1] <= w[0]) {
                    errors.push(err("mms.M_list", "must be nonempty and strictly increasing"));
                }
            }
            Command::Linking => {
                if let Some(&l) = self.linking.l_values.iter().find(|&&l| l == 0 || l > p.m) {
                    errors.push(err("linking.l_values", format!("level {l} outside 1..={}", p.m)));
                }
            }
            Command::Multi => {
                if self.search.n_seeds == 0 {
                    errors.push(err("search.n_seeds", "must be positive"));
                }
            }
            Command::Solve | Command::Norms => {}
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ParseError { errors })
        }
    }
}

/// Parses and validates a TOML configuration. Unknown keys are rejected
/// with their dotted path.
pub fn parse_config(text: &str) -> Result<RunConfig, ParseError> {
    parse_config_with_seed(text, None)
}

/// As [`parse_config`], with `seed` (when given) replacing the file's seed
/// before validation.
pub fn parse_config_with_seed(text: &str, seed: Option<u64>) -> Result<RunConfig, ParseError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ParseError {
        errors: vec![err("", e.message().to_string())],
    })?;
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        ParseError {
            errors: vec![err(&path, e.into_inner().message().to_string())],
        }
    })?;
    let mut cfg = cfg;
    if seed.is_some() {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}
