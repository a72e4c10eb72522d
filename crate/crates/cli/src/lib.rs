//! Experiment runner: `run`, `check` and `grid` over built-in or file-backed
//! problems, writing trace CSVs.

pub mod config;
pub mod setup;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use vrpl_core::driver::{run_deterministic_pl, run_minibatch_pl, run_svr_pl, DriverError, RunResult, Schedule};
use vrpl_core::metrics::{emit_trace, MetricsObserver};
use vrpl_core::problems::checks::check_builtin;
use vrpl_core::{BuiltinProblem, Scheme, TraceRecord};

use config::{Algorithm, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) | CliError::ChecksFailed(_) => 3,
        }
    }
}

impl From<DriverError> for CliError {
    fn from(e: DriverError) -> Self {
        match e {
            DriverError::Schedule(_) | DriverError::Model(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// `dir/trace.csv` with suffix `seed3` becomes `dir/trace.seed3.csv`.
pub fn suffixed(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trace".into());
    let ext = out.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}.{suffix}.{ext}"))
}

fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    emit_trace(trace, BufWriter::new(file)).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Pointwise mean of objective, `||G||²` and wall time over equal-length
/// traces; counters come from the first.
pub fn mean_trace(traces: &[&[TraceRecord]]) -> Result<Vec<TraceRecord>, CliError> {
    let Some(first) = traces.first() else {
        return Ok(Vec::new());
    };
    if traces.iter().any(|t| t.len() != first.len()) {
        return Err(CliError::Numerical("traces have different lengths".into()));
    }
    let r = traces.len() as f64;
    Ok((0..first.len())
        .map(|i| {
            let mut rec = first[i].clone();
            rec.objective = traces.iter().map(|t| t[i].objective).sum::<f64>() / r;
            rec.grad_map_sq = traces.iter().map(|t| t[i].grad_map_sq).sum::<f64>() / r;
            rec.wall_ms = (traces.iter().map(|t| t[i].wall_ms as f64).sum::<f64>() / r).round() as u64;
            rec
        })
        .collect())
}

struct Prepared {
    bp: BuiltinProblem,
    schedule: Schedule,
}

fn prepare(cfg: &RunConfig, penalty: Option<f64>) -> Result<Prepared, CliError> {
    if cfg.repeats == 0 {
        return Err(CliError::Usage("repeats must be at least 1".into()));
    }
    if cfg.stride == 0 {
        return Err(CliError::Usage("stride must be at least 1".into()));
    }
    let bp = setup::build_problem(cfg)?;
    let m = match penalty {
        Some(m) => m,
        None => setup::penalty(cfg, &bp)?,
    };
    let schedule = setup::build_schedule(cfg, &bp, m)?;
    schedule.validate(&bp.problem)?;
    Ok(Prepared { bp, schedule })
}

fn run_seed(cfg: &RunConfig, prep: &Prepared, seed: u64) -> Result<RunResult, CliError> {
    let p = &prep.bp.problem;
    let s = &prep.schedule;
    let mut obs = MetricsObserver::new(p, s.penalty, cfg.stride).with_solver(s.solver.clone());
    if cfg.timing {
        obs = obs.with_timing();
    }
    let x0 = &prep.bp.x0;
    let res = match cfg.algorithm {
        Algorithm::Pl => run_deterministic_pl(p, s.penalty, s.total_iterations(), x0, &s.solver, &mut obs),
        Algorithm::Spl => run_minibatch_pl(p, s, x0, seed, &mut obs),
        Algorithm::SvrPl => run_svr_pl(p, Scheme::SvrgCorrected, s, x0, seed, &mut obs),
        Algorithm::SarahPl => run_svr_pl(p, Scheme::Sarah, s, x0, seed, &mut obs),
    }?;
    Ok(res)
}

fn run_all(cfg: &RunConfig, prep: &Prepared) -> Result<Vec<RunResult>, CliError> {
    (0..cfg.repeats as u64).into_par_iter().map(|r| run_seed(cfg, prep, cfg.seed + r)).collect()
}

fn summary_line(r: &RunResult) -> String {
    let last = r.trace.last();
    format!(
        "seed {}: final objective {:.10e}, ||G||^2 {:.6e}, samples g {} J {}, output iterate {:?}",
        r.seed,
        last.map_or(f64::NAN, |t| t.objective),
        last.map_or(f64::NAN, |t| t.grad_map_sq),
        r.total_calls_g,
        r.total_calls_j,
        r.output_index
    )
}

/// Writes one trace per seed (plus their mean when repeated) and a summary
/// line per seed to `log`.
pub fn cmd_run(cfg: &RunConfig, log: &mut dyn Write) -> Result<(), CliError> {
    let prep = prepare(cfg, None)?;
    let results = run_all(cfg, &prep)?;
    if cfg.repeats == 1 {
        write_trace(&cfg.out, &results[0].trace)?;
    } else {
        for r in &results {
            write_trace(&suffixed(&cfg.out, &format!("seed{}", r.seed)), &r.trace)?;
        }
        let traces: Vec<&[TraceRecord]> = results.iter().map(|r| r.trace.as_slice()).collect();
        write_trace(&suffixed(&cfg.out, "mean"), &mean_trace(&traces)?)?;
    }
    for r in &results {
        writeln!(log, "{}", summary_line(r)).map_err(|e| CliError::Data(e.to_string()))?;
    }
    Ok(())
}

/// Finite-difference and Lipschitz checks; fails if any check fails.
pub fn cmd_check(cfg: &RunConfig, log: &mut dyn Write) -> Result<(), CliError> {
    let bp = setup::build_problem(cfg)?;
    let outcomes = check_builtin(&bp, cfg.seed).map_err(|e| CliError::Numerical(e.to_string()))?;
    let mut failed = 0;
    for o in &outcomes {
        failed += usize::from(!o.passed);
        writeln!(log, "{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail)
            .map_err(|e| CliError::Data(e.to_string()))?;
    }
    if failed > 0 {
        Err(CliError::ChecksFailed(failed))
    } else {
        Ok(())
    }
}

/// Runs every `M` in `m_grid` on the shared seed list, writes one (mean)
/// trace per value and reports the `M` with the lowest final mean objective.
pub fn cmd_grid(cfg: &RunConfig, log: &mut dyn Write) -> Result<f64, CliError> {
    if cfg.m_grid.is_empty() {
        return Err(CliError::Usage("grid needs m_grid (or --m-list)".into()));
    }
    let mut best: Option<(f64, f64)> = None;
    for &m in &cfg.m_grid {
        if !(m > 0.0 && m.is_finite()) {
            return Err(CliError::Usage(format!("M must be positive, got {m}")));
        }
        let prep = prepare(cfg, Some(m))?;
        let results = run_all(cfg, &prep)?;
        let traces: Vec<&[TraceRecord]> = results.iter().map(|r| r.trace.as_slice()).collect();
        let mean = if results.len() == 1 { results[0].trace.clone() } else { mean_trace(&traces)? };
        write_trace(&suffixed(&cfg.out, &format!("M{m}")), &mean)?;
        let final_obj = mean.last().map_or(f64::INFINITY, |t| t.objective);
        writeln!(log, "M {m}: final mean objective {final_obj:.10e}").map_err(|e| CliError::Data(e.to_string()))?;
        if best.is_none_or(|(_, v)| final_obj < v) {
            best = Some((m, final_obj));
        }
    }
    let (m, v) = best.expect("grid is nonempty");
    writeln!(log, "best M = {m} (final mean objective {v:.10e})").map_err(|e| CliError::Data(e.to_string()))?;
    Ok(m)
}
