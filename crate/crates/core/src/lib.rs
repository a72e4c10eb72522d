//! Stochastic variance-reduced prox-linear methods for composite problems
//! `min f(g(x)) + h(x)`.

pub mod driver;
pub mod estimators;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod problems;
pub mod prox;
pub mod subproblem;

pub use driver::{
    run_deterministic_pl, run_minibatch_pl, run_svr_pl, Checkpoint, DriverError, EpochPlan, Horizon, NoObserver,
    Observer, RunResult, Schedule,
};
pub use estimators::{BatchSpec, EstimateOut, EstimatorError, EstimatorState, Scheme};
pub use linalg::{LinalgError, Matrix, Vector};
pub use metrics::{MetricsError, MetricsObserver, TraceRecord};
pub use model::{
    ComponentOracle, CompositeProblem, ModelError, OuterFunction, Regularizer, SamplingRegime, SmoothnessConstants,
    Token, TokenSampler,
};
pub use problems::BuiltinProblem;
pub use subproblem::{ProxLinearModel, SolverOptions, SubproblemError, SubproblemSolution};
