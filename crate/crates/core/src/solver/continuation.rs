use std::io::Write;

use serde::{Deserialize, Serialize};

use super::newton::{newton_solve, NewtonOptions, SolutionState};
use super::PenalizedProblem;
use crate::error::{Result, WaveError};
use crate::nonlinearity::Nonlinear;
use crate::norms::{grid_max, sobolev_norm, SobolevConvention};
use crate::spectral::{project, SpectralField, SubspaceTag, AREA, DEFAULT_OVERSAMPLE};

/// Retries with a shorter step before declaring a stall.
const MAX_STEP_HALVINGS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSchedule {
    pub start: f64,
    pub factor: f64,
    pub floor: f64,
}

impl BetaSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.factor > 0.0 && self.factor < 1.0) {
            return Err(WaveError::Schedule(format!(
                "factor must lie in (0,1), got {}",
                self.factor
            )));
        }
        if !(self.floor > 0.0 && self.start > self.floor && self.start.is_finite()) {
            return Err(WaveError::Schedule(format!(
                "need start > floor > 0, got start={} floor={}",
                self.start, self.floor
            )));
        }
        Ok(())
    }

    /// Nominal β values: `start·factorⁿ` above the floor, then the floor.
    pub fn values(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let mut out = vec![self.start];
        loop {
            let next = out[out.len() - 1] * self.factor;
            if next <= self.floor * (1.0 + 1e-12) {
                out.push(self.floor);
                break;
            }
            out.push(next);
        }
        Ok(out)
    }
}

/// Norms of the kernel and off-kernel parts tracked along the continuation.
/// `L²` norms are over `Q` without normalization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitoredQuantities {
    pub v_c0: f64,
    pub v_t_l2: f64,
    pub v_tt_l2: f64,
    pub v_ttt_l2: f64,
    pub w_h1: f64,
    pub w_h2: f64,
}

impl MonitoredQuantities {
    pub fn of(u: &SpectralField) -> Self {
        let v = project(u, SubspaceTag::Kernel);
        let w = project(u, SubspaceTag::Eperp);
        let dt = |order: i32| {
            (AREA
                * v.iter()
                    .map(|(md, c)| (md.k as f64).powi(2 * order) * c.norm_sqr())
                    .sum::<f64>())
            .sqrt()
        };
        Self {
            v_c0: grid_max(&v, DEFAULT_OVERSAMPLE),
            v_t_l2: dt(1),
            v_tt_l2: dt(2),
            v_ttt_l2: dt(3),
            w_h1: sobolev_norm(&w, 1.0, SobolevConvention::Aniso),
            w_h2: sobolev_norm(&w, 2.0, SobolevConvention::Aniso),
        }
    }

    pub const NAMES: [&'static str; 6] = ["v_C0", "v_t_L2", "v_tt_L2", "v_ttt_L2", "w_H1", "w_H2"];

    pub fn values(&self) -> [f64; 6] {
        [
            self.v_c0,
            self.v_t_l2,
            self.v_tt_l2,
            self.v_ttt_l2,
            self.w_h1,
            self.w_h2,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationRow {
    pub beta: f64,
    pub residual_norm: f64,
    pub i_value: f64,
    pub newton_iters: usize,
    pub monitored: MonitoredQuantities,
}

#[derive(Debug)]
pub struct StallReport {
    pub beta: f64,
    pub error: Box<WaveError>,
}

#[derive(Debug)]
pub struct ContinuationTrace {
    pub rows: Vec<ContinuationRow>,
    pub solutions: Vec<SolutionState>,
    pub stalled: Option<StallReport>,
}

impl ContinuationTrace {
    pub fn is_complete(&self) -> bool {
        self.stalled.is_none()
    }

    pub fn last(&self) -> Option<&SolutionState> {
        self.solutions.last()
    }

    /// Converts a stalled trace into `StallAt`, dropping the partial rows.
    pub fn into_result(self) -> Result<Self> {
        match self.stalled {
            Some(StallReport { beta, error }) => Err(WaveError::StallAt { beta, source: error }),
            None => Ok(self),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["beta", "residual_norm", "I_value", "newton_iters"];
        header.extend(MonitoredQuantities::NAMES);
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                format!("{:.17e}", r.beta),
                format!("{:.17e}", r.residual_norm),
                format!("{:.17e}", r.i_value),
                r.newton_iters.to_string(),
            ];
            rec.extend(r.monitored.values().iter().map(|v| format!("{v:.17e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Solves at `schedule.start` from `seed`, then lowers β geometrically with
/// warm starts. A failed step is retried with the log-step halved; after
/// [`MAX_STEP_HALVINGS`] retries the trace is returned with `stalled` set.
pub fn continuation_beta<N: Nonlinear + Clone>(
    p0: &PenalizedProblem<N>,
    schedule: &BetaSchedule,
    seed: &SpectralField,
    opts: &NewtonOptions,
) -> Result<ContinuationTrace> {
    let targets = schedule.values()?;
    let mut trace = ContinuationTrace {
        rows: Vec::new(),
        solutions: Vec::new(),
        stalled: None,
    };
    let mut current = seed.resized(p0.truncation());
    let mut prev_beta: Option<f64> = None;

    for &target in &targets {
        let mut step_log = prev_beta.map(|b| (target / b).ln());
        let mut attempts = 0;
        loop {
            let beta = match (prev_beta, step_log) {
                (Some(b), Some(l)) => b * l.exp(),
                _ => target,
            };
            let p = p0.with_beta(beta)?;
            match newton_solve(&p, &current, opts) {
                Ok(sol) => {
                    trace.rows.push(ContinuationRow {
                        beta,
                        residual_norm: sol.residual_norm,
                        i_value: sol.i_value,
                        newton_iters: sol.newton_iters,
                        monitored: MonitoredQuantities::of(&sol.u),
                    });
                    current = sol.u.clone();
                    trace.solutions.push(sol);
                    prev_beta = Some(beta);
                    if (beta - target).abs() <= 1e-12 * target {
                        break;
                    }
                    // intermediate point reached; aim at the target again
                    step_log = Some((target / beta).ln());
                    attempts = 0;
                }
                Err(err) => {
                    attempts += 1;
                    match step_log {
                        Some(l) if attempts <= MAX_STEP_HALVINGS => step_log = Some(0.5 * l),
                        _ => {
                            trace.stalled = Some(StallReport {
                                beta,
                                error: Box::new(err),
                            });
                            return Ok(trace);
                        }
                    }
                }
            }
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{make_nonlinearity, NonlinearitySpec};
    use crate::solver::Sign;
    use crate::spectral::random_field;

    #[test]
    fn schedule_validation() {
        let bad = BetaSchedule {
            start: 1e-1,
            factor: 1.0,
            floor: 1e-3,
        };
        assert!(matches!(bad.validate(), Err(WaveError::Schedule(_))));
        let bad = BetaSchedule {
            start: 1e-3,
            factor: 0.5,
            floor: 1e-2,
        };
        assert!(bad.validate().is_err());
        let ok = BetaSchedule {
            start: 1.0,
            factor: 0.5,
            floor: 0.2,
        };
        assert_eq!(ok.values().unwrap(), vec![1.0, 0.5, 0.25, 0.2]);
    }

    #[test]
    fn beta_independent_target_is_recovered_at_every_step() {
        // a target without kernel part makes the manufactured forcing β-independent
        let m = 10;
        let target = random_field(9, m, SubspaceTag::Eperp, 0.5);
        let nl = make_nonlinearity(NonlinearitySpec::mild_cubic()).unwrap();
        let p = PenalizedProblem::new(m, 1e-1, Sign::Plus, nl).unwrap();
        let g = p.unforced_residual(&target);
        let p = p.with_forcing(g).unwrap();
        let sched = BetaSchedule {
            start: 1e-1,
            factor: 0.1,
            floor: 1e-4,
        };
        let trace = continuation_beta(&p, &sched, &SpectralField::zeros(m), &NewtonOptions::default()).unwrap();
        assert!(trace.is_complete());
        assert_eq!(trace.rows.len(), 4);
        for sol in &trace.solutions {
            assert!((&sol.u - &target).l2_norm() < 1e-9);
        }
        let first = trace.rows[0].monitored.values();
        for row in &trace.rows {
            for (a, b) in row.monitored.values().iter().zip(first) {
                assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
            }
        }
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("beta,residual_norm,I_value"));
        assert_eq!(text.lines().count(), 5);
    }
}
