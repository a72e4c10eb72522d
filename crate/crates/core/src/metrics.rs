//! Offline stationarity and objective measurement, and trace CSV I/O.

use std::io::{BufRead, Write};
use std::time::Instant;

use thiserror::Error;

use crate::driver::{Checkpoint, Observer};
use crate::linalg::Vector;
use crate::model::{full_average_jacobian, full_average_map, objective_value, CompositeProblem, ModelError};
use crate::subproblem::{solve, ProxLinearModel, SolverOptions, SubproblemError};

pub const TRACE_HEADER: &str = "samples_g,samples_j,epoch,inner,objective,grad_map_sq,wall_ms";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Subproblem(#[from] SubproblemError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub samples_g: u64,
    pub samples_j: u64,
    pub epoch: usize,
    pub inner: usize,
    pub objective: f64,
    pub grad_map_sq: f64,
    pub wall_ms: u64,
}

/// `G_M(x) = M (x - x₊)` with `x₊` solved from the exact mapping and Jacobian.
pub fn exact_gradient_mapping(
    problem: &CompositeProblem,
    x: &Vector,
    penalty: f64,
    opts: &SolverOptions,
) -> Result<Vector, MetricsError> {
    let model = ProxLinearModel {
        x_bar: x.clone(),
        g_tilde: full_average_map(problem, x)?,
        j_tilde: full_average_jacobian(problem, x)?,
        penalty,
        outer: problem.outer,
        reg: problem.reg,
    };
    let sol = solve(&model, opts)?;
    Ok(approx_gradient_mapping(x, &sol.x_plus, penalty))
}

/// `M (x - x_next)`
pub fn approx_gradient_mapping(x: &Vector, x_next: &Vector, penalty: f64) -> Vector {
    x.sub(x_next).scale(penalty)
}

/// Writes the header and one line per record.
pub fn emit_trace<W: Write>(records: &[TraceRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{:.16e},{:.16e},{}",
            r.samples_g, r.samples_j, r.epoch, r.inner, r.objective, r.grad_map_sq, r.wall_ms
        )?;
    }
    out.flush()
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceRecord>, MetricsError> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(|h| h.trim_end_matches('\r')) != Some(TRACE_HEADER) {
        return Err(MetricsError::Parse { line: 1, msg: "missing header".into() });
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        let lineno = i + 2;
        let err = |msg: String| MetricsError::Parse { line: lineno, msg };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(err(format!("expected 7 fields, got {}", f.len())));
        }
        let int = |s: &str| s.parse::<u64>().map_err(|e| err(format!("{s:?}: {e}")));
        let real = |s: &str| s.parse::<f64>().map_err(|e| err(format!("{s:?}: {e}")));
        out.push(TraceRecord {
            samples_g: int(f[0])?,
            samples_j: int(f[1])?,
            epoch: int(f[2])? as usize,
            inner: int(f[3])? as usize,
            objective: real(f[4])?,
            grad_map_sq: real(f[5])?,
            wall_ms: int(f[6])?,
        });
    }
    Ok(out)
}

/// Lowest objective seen across traces; stands in for `Φ*`.
pub fn phi_star_estimate<'a>(traces: impl IntoIterator<Item = &'a [TraceRecord]>) -> Option<f64> {
    traces.into_iter().flatten().map(|r| r.objective).min_by(f64::total_cmp)
}

/// Records objective and `||G_M||²` at every `stride`-th checkpoint and at
/// the final point.
pub struct MetricsObserver {
    problem: CompositeProblem,
    penalty: f64,
    opts: SolverOptions,
    stride: usize,
    timing: Option<Instant>,
    seen: usize,
}

impl MetricsObserver {
    pub fn new(problem: &CompositeProblem, penalty: f64, stride: usize) -> Self {
        MetricsObserver {
            problem: problem.clone(),
            penalty,
            opts: SolverOptions::default(),
            stride: stride.max(1),
            timing: None,
            seen: 0,
        }
    }

    pub fn with_solver(mut self, opts: SolverOptions) -> Self {
        self.opts = opts;
        self
    }

    /// Fill `wall_ms` with elapsed time; otherwise it stays 0 so traces are
    /// byte-reproducible.
    pub fn with_timing(mut self) -> Self {
        self.timing = Some(Instant::now());
        self
    }
}

impl Observer for MetricsObserver {
    fn observe(&mut self, cp: &Checkpoint<'_>) -> Result<Option<TraceRecord>, MetricsError> {
        let due = cp.is_final || self.seen.is_multiple_of(self.stride);
        self.seen += 1;
        if !due {
            return Ok(None);
        }
        let objective = objective_value(&self.problem, cp.x)?;
        let gm = exact_gradient_mapping(&self.problem, cp.x, self.penalty, &self.opts)?;
        Ok(Some(TraceRecord {
            samples_g: cp.samples_g,
            samples_j: cp.samples_j,
            epoch: cp.epoch,
            inner: cp.inner,
            objective,
            grad_map_sq: gm.norm_sq(),
            wall_ms: self.timing.map_or(0, |t| t.elapsed().as_millis() as u64),
        }))
    }
}
