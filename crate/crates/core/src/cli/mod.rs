//! Command-line front end. Every run writes `report.json` into the output
//! directory together with the command's field files and CSV sidecars.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure,
//! 4 verification violation.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub use config::{parse_config, Command, ParseError, RunConfig, Suite};

use crate::error::WaveError;
use crate::norms::{norm_panel, write_norm_csv};
use crate::solver::{
    continuation_beta, linking_report, multi_seed_search, newton_solve, LinkingOptions, SearchOptions, SolutionState,
};
use crate::spectral::{random_field, read_field, write_field, SpectralField, SubspaceTag};
use crate::verify::{self, EnsembleSpec, InequalityReport, MmsOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_VIOLATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "wavetorus",
    version,
    about = "Spectral solver and estimate checks for periodic wave equations"
)]
pub struct Args {
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Inequality suite for `verify`; overrides the config.
    #[arg(long, value_enum)]
    pub suite: Option<Suite>,
}

/// Why a run did not succeed.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Solver(WaveError),
    Violation(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Solver(_) => EXIT_SOLVER,
            Failure::Violation(_) => EXIT_VIOLATION,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config_error",
            Failure::Violation(_) => "violation",
            Failure::Solver(e) => match e {
                WaveError::NoConvergence { .. } => "no_convergence",
                WaveError::SingularJacobian { .. } => "singular_jacobian",
                WaveError::StallAt { .. } => "stall",
                WaveError::Schedule(_) => "schedule_error",
                _ => "solver_error",
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(m) | Failure::Violation(m) => m.clone(),
            Failure::Solver(e) => e.to_string(),
        }
    }
}

impl From<WaveError> for Failure {
    fn from(e: WaveError) -> Self {
        match e {
            WaveError::Schedule(_) | WaveError::Rejected(_) => Failure::Config(e.to_string()),
            other => Failure::Solver(other),
        }
    }
}

/// A finished (possibly failed) run.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: Value,
}

fn provenance(config_text: &str, seed: Option<u64>) -> Value {
    let hash = Sha256::digest(config_text.as_bytes());
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    json!({
        "config_sha256": hex,
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
    })
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    seed: u64,
    /// Violations found; the run continues and reports them all.
    violations: Vec<String>,
    /// Result produced before a failure, kept in the report.
    partial: Option<Value>,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_field(&self, name: &str, u: &SpectralField) -> Result<String, Failure> {
        write_field(self.path(name), u).map_err(Failure::Solver)?;
        Ok(name.to_string())
    }

    fn csv(&self, name: &str, write: impl FnOnce(fs::File) -> crate::Result<()>) -> Result<String, Failure> {
        let f = fs::File::create(self.path(name)).map_err(|e| Failure::Solver(e.into()))?;
        write(f).map_err(Failure::Solver)?;
        Ok(name.to_string())
    }

    fn violation(&mut self, msg: String) {
        self.violations.push(msg);
    }
}

fn solution_json(p: &crate::solver::PenalizedProblem, s: &SolutionState) -> Value {
    json!({
        "residual_norm": s.residual_norm,
        "I": s.i_value,
        "newton_iters": s.newton_iters,
        "identity_gap": p.critical_identity_gap(&s.u),
        "kernel_mass": s.u.mass_on(SubspaceTag::Kernel),
        "l2_norm": s.u.l2_norm(),
    })
}

fn read_input_field(path: &Path) -> Result<SpectralField, Failure> {
    read_field(path).map_err(|e| Failure::Config(format!("cannot read field {}: {e}", path.display())))
}

fn run_solve(ctx: &mut Ctx) -> Result<Value, Failure> {
    let cfg = ctx.cfg;
    let mut p = cfg.problem.build()?;
    let m = p.truncation();
    let target = cfg
        .solve
        .manufactured_decay
        .map(|d| random_field(ctx.seed, m, SubspaceTag::All, d));
    if let Some(t) = &target {
        let g = p.unforced_residual(t);
        p = p.with_forcing(g)?;
    }
    let initial = match &cfg.solve.initial {
        Some(path) => read_input_field(path)?.resized(m),
        None => SpectralField::zeros(m),
    };
    let sol = match newton_solve(&p, &initial, &cfg.newton) {
        Ok(s) => s,
        Err(WaveError::NoConvergence {
            iters,
            residual,
            best,
            trace,
        }) => {
            ctx.write_field("solution_best.json", &best.u)?;
            return Err(Failure::Solver(WaveError::NoConvergence {
                iters,
                residual,
                best,
                trace,
            }));
        }
        Err(e) => return Err(e.into()),
    };
    let file = ctx.write_field("solution.json", &sol.u)?;
    let trace = ctx.csv("newton_trace.csv", |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["iteration", "residual_norm"])?;
        for (i, r) in sol.trace.iter().enumerate() {
            w.write_record([i.to_string(), format!("{r:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    })?;
    let mut result = solution_json(&p, &sol);
    if let Some(t) = &target {
        result["target_error"] = json!((&sol.u - t).l2_norm());
    }
    Ok(json!({ "solution": result, "files": { "field": file, "trace": trace } }))
}

fn run_continue(ctx: &mut Ctx) -> Result<Value, Failure> {
    let cfg = ctx.cfg;
    let schedule = cfg
        .schedule
        .ok_or_else(|| Failure::Config("schedule: missing".into()))?;
    schedule.validate()?;
    let p = cfg.problem.build()?;
    let p_start = p.with_beta(schedule.start)?;
    let seed_field = match &cfg.continuation.initial {
        Some(path) => read_input_field(path)?,
        None => {
            let opts = SearchOptions {
                n_seeds: cfg.continuation.search_seeds,
                master_seed: ctx.seed,
                newton: cfg.newton,
                ..Default::default()
            };
            multi_seed_search(&p_start, &opts)
                .into_iter()
                .max_by(|a, b| {
                    a.u.mass_on(SubspaceTag::Kernel)
                        .total_cmp(&b.u.mass_on(SubspaceTag::Kernel))
                })
                .map(|s| s.u)
                .ok_or_else(|| {
                    Failure::Solver(WaveError::InvalidArgument(
                        "search found no solution to seed from".into(),
                    ))
                })?
        }
    };
    let trace = continuation_beta(&p, &schedule, &seed_field, &cfg.newton)?;
    let trace_file = ctx.csv("continuation.csv", |f| trace.write_csv(f))?;
    let mut files = json!({ "trace": trace_file });
    if let Some(last) = trace.last() {
        files["final_field"] = json!(ctx.write_field("solution_final.json", &last.u)?);
    }
    let apriori = if trace.rows.is_empty() {
        Value::Null
    } else {
        let rep = verify::apriori_monitor(&trace, cfg.continuation.apriori_bound)?;
        for q in rep.quantities.iter().filter(|q| q.flagged) {
            ctx.violation(format!("{} varies by factor {:.3} > {}", q.name, q.ratio, rep.bound));
        }
        serde_json::to_value(rep).expect("serializable")
    };
    let report = json!({
        "rows": trace.rows,
        "complete": trace.is_complete(),
        "apriori": apriori,
        "files": files,
    });
    if let Some(stall) = trace.stalled {
        ctx.partial = Some(report);
        return Err(Failure::Solver(WaveError::StallAt {
            beta: stall.beta,
            source: stall.error,
        }));
    }
    Ok(report)
}

fn run_multi(ctx: &mut Ctx) -> Result<Value, Failure> {
    let cfg = ctx.cfg;
    let p = cfg.problem.build()?;
    let opts = SearchOptions {
        n_seeds: cfg.search.n_seeds,
        dedup_threshold: cfg.search.dedup_threshold,
        master_seed: ctx.seed,
        newton: cfg.newton,
    };
    let sols = multi_seed_search(&p, &opts);
    let mut rows = Vec::new();
    for (i, s) in sols.iter().enumerate() {
        let mut row = solution_json(&p, s);
        row["field"] = json!(ctx.write_field(&format!("solution_{i:03}.json"), &s.u)?);
        rows.push(row);
    }
    let table = ctx.csv("solutions.csv", |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record([
            "index",
            "I_value",
            "residual_norm",
            "newton_iters",
            "identity_gap",
            "kernel_mass",
            "l2_norm",
        ])?;
        for (i, s) in sols.iter().enumerate() {
            w.write_record([
                i.to_string(),
                format!("{:.17e}", s.i_value),
                format!("{:.17e}", s.residual_norm),
                s.newton_iters.to_string(),
                format!("{:.17e}", p.critical_identity_gap(&s.u)),
                format!("{:.17e}", s.u.mass_on(SubspaceTag::Kernel)),
                format!("{:.17e}", s.u.l2_norm()),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(json!({ "count": sols.len(), "solutions": rows, "files": { "table": table } }))
}

fn ensemble(cfg: &RunConfig, seed: u64) -> EnsembleSpec {
    let v = &cfg.verify;
    EnsembleSpec {
        size: v.size,
        m: v.m,
        decay_min: v.decay_min,
        decay_max: v.decay_max,
        seed,
        oversample: v.oversample,
    }
}

/// Runs `check` at `M` (and `2M` when configured), writes the trial CSV and
/// records violations and excessive growth of the ensemble maximum.
fn inequality(
    ctx: &mut Ctx,
    tag: &str,
    ens: &EnsembleSpec,
    growth_matters: bool,
    check: impl Fn(&EnsembleSpec) -> crate::Result<InequalityReport>,
) -> Result<Value, Failure> {
    let rep = check(ens)?;
    let file = ctx.csv(&format!("{tag}_trials.csv"), |f| rep.write_trials_csv(f))?;
    if rep.violation_count > 0 {
        ctx.violation(format!("{tag}: {} violations", rep.violation_count));
    }
    let mut out = json!({ "report": rep, "trials_file": file });
    if ctx.cfg.verify.double_m {
        let doubled = check(&ens.with_truncation(2 * ens.m))?;
        let growth = doubled.ratios.max / rep.ratios.max - 1.0;
        if doubled.violation_count > 0 {
            ctx.violation(format!("{tag} at 2M: {} violations", doubled.violation_count));
        }
        if growth_matters && !(growth <= ctx.cfg.verify.max_growth) {
            ctx.violation(format!(
                "{tag}: ensemble maximum grew by {:.2}% under M-doubling",
                100.0 * growth
            ));
        }
        out["doubled"] = json!(doubled);
        out["max_growth"] = json!(growth);
    }
    Ok(out)
}

fn run_verify(ctx: &mut Ctx, suite: Suite) -> Result<Value, Failure> {
    let v = ctx.cfg.verify.clone();
    let ens = ensemble(ctx.cfg, ctx.seed);
    let mut results = Vec::new();
    match suite {
        Suite::Hy => {
            for p in v.p.clone().unwrap_or(vec![4.0 / 3.0, 1.5, 2.0]) {
                results.push(inequality(ctx, &format!("hy_p{p:.4}"), &ens, false, |e| {
                    verify::check_hausdorff_young(e, p)
                })?);
            }
        }
        Suite::Gn => {
            for p in v.p.clone().unwrap_or(vec![3.0, 4.0]) {
                results.push(inequality(ctx, &format!("gn_p{p:.4}"), &ens, true, |e| {
                    verify::check_gn(e, p)
                })?);
            }
        }
        Suite::Embedding => {
            for s in v.s.clone().unwrap_or(vec![0.5, 2.0 / 3.0]) {
                let mut entry = inequality(ctx, &format!("embedding_s{s:.4}"), &ens, true, |e| {
                    verify::check_embedding(e, s, &[]).map(|r| r.report)
                })?;
                let tail = verify::check_embedding(
                    &EnsembleSpec {
                        size: ens.size.min(100),
                        ..ens
                    },
                    s,
                    &v.tails,
                )?;
                if !tail.tail_strictly_decreasing {
                    ctx.violation(format!("embedding s={s}: tail ratios do not strictly decrease"));
                }
                entry["tail"] = json!(tail.tail);
                entry["tail_strictly_decreasing"] = json!(tail.tail_strictly_decreasing);
                results.push(entry);
            }
        }
        Suite::Holder => {
            let (g, gp) = (v.gamma.unwrap_or(0.6), v.gamma_prime.unwrap_or(0.5));
            results.push(inequality(ctx, "holder_to_sobolev", &ens, false, |e| {
                verify::check_holder_to_sobolev(e, g, gp)
            })?);
        }
        Suite::H1 => results.push(inequality(ctx, "h1_bound", &ens, false, verify::check_h1_bound)?),
        Suite::Box => results.push(inequality(
            ctx,
            "box_roundtrip",
            &ens,
            false,
            verify::check_box_roundtrip,
        )?),
        Suite::Regularity => {
            let g = v.gamma.unwrap_or(0.45);
            for p in v.p.clone().unwrap_or(vec![2.0]) {
                results.push(inequality(ctx, &format!("regularity_p{p:.4}"), &ens, true, |e| {
                    verify::check_regularity(e, p, g)
                })?);
            }
        }
    }
    Ok(json!({ "suite": suite, "results": results }))
}

fn run_norms(ctx: &mut Ctx) -> Result<Value, Failure> {
    let cfg = ctx.cfg;
    let u = match &cfg.norms.field {
        Some(path) => read_input_field(path)?,
        None => random_field(ctx.seed, cfg.problem.m, SubspaceTag::All, cfg.norms.decay),
    };
    let rows = norm_panel(&u, cfg.problem.oversample);
    let file = ctx.csv("norms.csv", |f| write_norm_csv(f, &rows))?;
    Ok(json!({ "M": u.truncation(), "norms": rows, "files": { "table": file } }))
}

fn run_mms(ctx: &mut Ctx) -> Result<Value, Failure> {
    let cfg = ctx.cfg;
    let p = cfg.problem.build()?;
    let opts = MmsOptions {
        decay: cfg.mms.decay,
        m_list: cfg.mms.m_list.clone(),
        beta: cfg.problem.beta,
        sigma: cfg.problem.sigma,
        seed: ctx.seed,
        newton: cfg.newton,
    };
    let table = verify::mms_run(p.nonlinearity(), &opts)?;
    let file = ctx.csv("mms.csv", |f| table.write_csv(f))?;
    let ratios = table.error_ratios();
    let failed: Vec<usize> = table.rows.iter().filter(|r| !r.converged).map(|r| r.m).collect();
    let report = json!({
        "table": table,
        "error_ratios": ratios,
        "monotone": ratios.iter().all(|&r| r < 1.0),
        "files": { "table": file },
    });
    if !failed.is_empty() {
        ctx.partial = Some(report);
        return Err(Failure::Solver(WaveError::InvalidArgument(format!(
            "newton failed at M = {failed:?}"
        ))));
    }
    Ok(report)
}

fn run_linking(ctx: &mut Ctx) -> Result<Value, Failure> {
    let cfg = ctx.cfg;
    let p = cfg.problem.build()?;
    let l = &cfg.linking;
    let opts = LinkingOptions {
        rhos: l.rhos.clone(),
        n_starts: l.n_starts,
        n_sphere_samples: l.n_sphere_samples,
        max_ascent_iters: l.max_ascent_iters,
        seed: ctx.seed,
    };
    let rep = linking_report(&p, &l.l_values, &opts)?;
    let file = ctx.csv("linking.csv", |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["l", "dimension", "max_value", "ascent_iters", "final_gradient"])?;
        for r in &rep.rows {
            w.write_record([
                r.l.to_string(),
                r.dimension.to_string(),
                format!("{:.17e}", r.max_value),
                r.ascent_iters.to_string(),
                format!("{:.17e}", r.final_gradient),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    if !rep.nondecreasing {
        ctx.violation("linking levels M(l) are not nondecreasing".into());
    }
    Ok(json!({ "report": rep, "files": { "table": file } }))
}

/// Runs a parsed configuration and writes `report.json` into `out`.
pub fn run(cfg: &RunConfig, config_text: &str, out: &Path, suite: Option<Suite>) -> RunOutcome {
    let mut ctx = Ctx {
        cfg,
        out,
        seed: cfg.seed_or_zero(),
        violations: Vec::new(),
        partial: None,
    };
    let result = fs::create_dir_all(out)
        .map_err(|e| Failure::Config(format!("cannot create output directory {}: {e}", out.display())))
        .and_then(|_| match cfg.command {
            Command::Solve => run_solve(&mut ctx),
            Command::Continue => run_continue(&mut ctx),
            Command::Multi => run_multi(&mut ctx),
            Command::Verify => match suite.or(cfg.verify.suite) {
                Some(s) => run_verify(&mut ctx, s),
                None => Err(Failure::Config("verify.suite: no suite given (use --suite)".into())),
            },
            Command::Norms => run_norms(&mut ctx),
            Command::Mms => run_mms(&mut ctx),
            Command::Linking => run_linking(&mut ctx),
        });
    let result = match result {
        Ok(v) if !ctx.violations.is_empty() => Err((Failure::Violation(ctx.violations.join("; ")), Some(v))),
        Ok(v) => Ok(v),
        Err(f) => Err((f, ctx.partial.take())),
    };
    let mut report = json!({
        "command": cfg.command,
        "provenance": provenance(config_text, cfg.seed),
    });
    let exit_code = match result {
        Ok(v) => {
            report["status"] = json!("ok");
            report["result"] = v;
            EXIT_OK
        }
        Err((f, partial)) => {
            report["status"] = json!("failed");
            report["failure"] = json!({ "code": f.code(), "exit_code": f.exit_code(), "message": f.message() });
            if let Some(v) = partial {
                report["result"] = v;
            }
            f.exit_code()
        }
    };
    if out.is_dir() {
        let text = serde_json::to_string_pretty(&report).expect("serializable");
        if let Err(e) = fs::write(out.join("report.json"), text + "\n") {
            eprintln!("cannot write report: {e}");
        }
    }
    RunOutcome { exit_code, report }
}

/// Entry point shared by the binary: parses arguments, runs and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let fail = |msg: String| {
        eprintln!(
            "{}",
            json!({ "status": "failed", "failure": { "code": "config_error", "exit_code": EXIT_CONFIG, "message": msg } })
        );
        EXIT_CONFIG
    };
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return fail(format!("cannot read {}: {e}", args.config.display())),
    };
    let cfg = match config::parse_config_with_seed(&text, args.seed) {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    if cfg.command != args.command {
        return fail(format!(
            "command: config is for `{}` but `{}` was requested",
            cfg.command.name(),
            args.command.name()
        ));
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("wavetorus-out"));
    let outcome = run(&cfg, &text, &out, args.suite);
    if outcome.exit_code != EXIT_OK {
        eprintln!(
            "{}",
            json!({ "status": "failed", "failure": outcome.report["failure"] })
        );
    }
    outcome.exit_code
}
