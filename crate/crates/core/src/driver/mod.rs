//! Variance-reduced, mini-batch and deterministic prox-linear loops.

mod schedule;

pub use schedule::*;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::estimators::{EstimateOut, EstimatorError, EstimatorState, Scheme};
use crate::linalg::Vector;
use crate::metrics::{MetricsError, TraceRecord};
use crate::model::{CompositeProblem, ModelError};
use crate::subproblem::{solve, ProxLinearModel, SolverOptions, SubproblemError};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("estimator failed at epoch {epoch}, inner {inner}: {source}")]
    Estimator { epoch: usize, inner: usize, source: EstimatorError },
    #[error("subproblem failed at epoch {epoch}, inner {inner}: {source}")]
    Subproblem { epoch: usize, inner: usize, source: SubproblemError },
    #[error("observer: {0}")]
    Observer(#[from] MetricsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// State handed to the observer before each iterate is used, and once at
/// the final point. Counters are cumulative sample counts so far.
#[derive(Debug, Clone, Copy)]
pub struct Checkpoint<'a> {
    /// 1-based; the final point reports `K`.
    pub epoch: usize,
    /// 0-based within the epoch; the final point reports `τ_K`.
    pub inner: usize,
    pub x: &'a Vector,
    pub samples_g: u64,
    pub samples_j: u64,
    pub is_final: bool,
}

pub trait Observer {
    fn observe(&mut self, cp: &Checkpoint<'_>) -> Result<Option<TraceRecord>, MetricsError>;
}

pub struct NoObserver;

impl Observer for NoObserver {
    fn observe(&mut self, _: &Checkpoint<'_>) -> Result<Option<TraceRecord>, MetricsError> {
        Ok(None)
    }
}

impl<F> Observer for F
where
    F: FnMut(&Checkpoint<'_>) -> Result<Option<TraceRecord>, MetricsError>,
{
    fn observe(&mut self, cp: &Checkpoint<'_>) -> Result<Option<TraceRecord>, MetricsError> {
        self(cp)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub output_x: Vector,
    /// `(epoch, inner)` of the output iterate, epoch 1-based.
    pub output_index: (usize, usize),
    pub final_x: Vector,
    pub trace: Vec<TraceRecord>,
    pub total_calls_g: u64,
    pub total_calls_j: u64,
    pub total_raw_g: u64,
    pub total_raw_j: u64,
    pub seed: u64,
}

/// Uniform draw of one cell in the ragged `(epoch, inner)` grid.
fn draw_output(schedule: &Schedule, rng: &mut ChaCha8Rng) -> (usize, usize) {
    let mut pick = rng.gen_range(0..schedule.total_iterations());
    for (k, e) in schedule.epochs.iter().enumerate() {
        if pick < e.tau {
            return (k + 1, pick);
        }
        pick -= e.tau;
    }
    unreachable!("pick is below the total iteration count")
}

struct Counters {
    g: u64,
    j: u64,
    raw_g: u64,
    raw_j: u64,
}

impl Counters {
    fn add(&mut self, e: &EstimateOut) {
        self.g += e.calls_g;
        self.j += e.calls_j;
        self.raw_g += e.raw_evals_g;
        self.raw_j += e.raw_evals_j;
    }
}

fn step(
    problem: &CompositeProblem,
    x: &Vector,
    est: EstimateOut,
    schedule: &Schedule,
    epoch: usize,
    inner: usize,
) -> Result<Vector, DriverError> {
    let model = ProxLinearModel {
        x_bar: x.clone(),
        g_tilde: est.g_tilde,
        j_tilde: est.j_tilde,
        penalty: schedule.penalty,
        outer: problem.outer,
        reg: problem.reg,
    };
    solve(&model, &schedule.solver)
        .map(|s| s.x_plus)
        .map_err(|source| DriverError::Subproblem { epoch, inner, source })
}

fn check_start(problem: &CompositeProblem, x0: &Vector) -> Result<(), DriverError> {
    problem.check_x(x0)?;
    if !problem.reg.value(x0).is_finite() {
        return Err(DriverError::Schedule("starting point is outside the domain of h".into()));
    }
    Ok(())
}

fn run_epochs(
    problem: &CompositeProblem,
    scheme: Scheme,
    schedule: &Schedule,
    x0: &Vector,
    seed: u64,
    observer: &mut dyn Observer,
) -> Result<RunResult, DriverError> {
    schedule.validate(problem)?;
    check_start(problem, x0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = draw_output(schedule, &mut rng);
    let mut state = EstimatorState::new(scheme, rng);
    let mut counters = Counters { g: 0, j: 0, raw_g: 0, raw_j: 0 };
    let mut trace = Vec::new();
    let mut output = None;
    let mut x = x0.clone();

    for (k, plan) in schedule.epochs.iter().enumerate() {
        let epoch = k + 1;
        for inner in 0..plan.tau {
            let cp = Checkpoint {
                epoch,
                inner,
                x: &x,
                samples_g: counters.g,
                samples_j: counters.j,
                is_final: false,
            };
            trace.extend(observer.observe(&cp)?);
            if (epoch, inner) == target {
                output = Some(x.clone());
            }
            let est = if inner == 0 {
                state.anchor_reset(problem, &x, &plan.anchor)
            } else {
                state.inner_update(problem, &x, &plan.inner)
            }
            .map_err(|source| DriverError::Estimator { epoch, inner, source })?;
            counters.add(&est);
            x = step(problem, &x, est, schedule, epoch, inner)?;
        }
    }

    let last = schedule.epochs.last().expect("validated nonempty");
    let cp = Checkpoint {
        epoch: schedule.k(),
        inner: last.tau,
        x: &x,
        samples_g: counters.g,
        samples_j: counters.j,
        is_final: true,
    };
    trace.extend(observer.observe(&cp)?);
    Ok(RunResult {
        output_x: output.expect("target lies inside the grid"),
        output_index: target,
        final_x: x,
        trace,
        total_calls_g: counters.g,
        total_calls_j: counters.j,
        total_raw_g: counters.raw_g,
        total_raw_j: counters.raw_j,
        seed,
    })
}

/// Epoch loop with variance-reduced estimates. The output iterate is drawn
/// uniformly over all `(epoch, inner)` pairs before the run.
pub fn run_svr_pl(
    problem: &CompositeProblem,
    scheme: Scheme,
    schedule: &Schedule,
    x0: &Vector,
    seed: u64,
    observer: &mut dyn Observer,
) -> Result<RunResult, DriverError> {
    if !matches!(scheme, Scheme::SvrgCorrected | Scheme::Sarah) {
        return Err(DriverError::Schedule(format!("{scheme:?} is not a variance-reduced scheme")));
    }
    run_epochs(problem, scheme, schedule, x0, seed, observer)
}

/// Fresh mini-batch estimates every iteration over a single epoch.
pub fn run_minibatch_pl(
    problem: &CompositeProblem,
    schedule: &Schedule,
    x0: &Vector,
    seed: u64,
    observer: &mut dyn Observer,
) -> Result<RunResult, DriverError> {
    if schedule.k() != 1 {
        return Err(DriverError::Schedule(format!("mini-batch runs use one epoch, got {}", schedule.k())));
    }
    run_epochs(problem, Scheme::MiniBatch, schedule, x0, seed, observer)
}

/// `T` exact prox-linear steps. Reports the final iterate as output.
pub fn run_deterministic_pl(
    problem: &CompositeProblem,
    penalty: f64,
    iterations: usize,
    x0: &Vector,
    solver: &SolverOptions,
    observer: &mut dyn Observer,
) -> Result<RunResult, DriverError> {
    if iterations == 0 {
        return Err(DriverError::Schedule("need at least one iteration".into()));
    }
    let n = problem.regime.ground_truth_size().ok_or(ModelError::NoGroundTruth)?;
    let schedule = Schedule::full_batch(n, iterations, penalty).with_solver(solver.clone());
    let mut res = run_epochs(problem, Scheme::FullBatch, &schedule, x0, 0, observer)?;
    res.output_x = res.final_x.clone();
    res.output_index = (1, iterations);
    Ok(res)
}
