//! Builds problems and schedules from a [`RunConfig`].

use vrpl_core::driver::{
    schedule_adaptive, schedule_minibatch, schedule_sarah_expect_nonsmooth, schedule_sarah_expect_smooth,
    schedule_sarah_finite_smooth, schedule_svrg_finite, Horizon, Schedule,
};
use vrpl_core::ingest::{read_libsvm, read_returns_csv, LabelFilter};
use vrpl_core::problems::{
    builtin_problems, multiloss_oracle, multiloss_smooth_oracle, portfolio_oracle, synthetic_multiloss_instance,
    synthetic_returns, MultiLossInstance, PortfolioInstance,
};
use vrpl_core::{BatchSpec, BuiltinProblem, SolverOptions, Vector};

use crate::config::{Algorithm, RunConfig, ScheduleMode};
use crate::CliError;

fn multiloss_instance(cfg: &RunConfig) -> Result<MultiLossInstance, CliError> {
    let beta = cfg.beta.unwrap_or(0.01);
    let Some(path) = &cfg.data else {
        return Ok(synthetic_multiloss_instance(60, 5, beta, 21));
    };
    let filter = cfg.labels.map(|(positive, negative)| LabelFilter { positive, negative });
    let mut data = read_libsvm(path, filter).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if let Some(count) = cfg.samples {
        data = data.subsample(count, cfg.data_seed).map_err(|e| CliError::Data(e.to_string()))?;
    }
    if data.is_empty() {
        return Err(CliError::Data(format!("{}: no rows", path.display())));
    }
    let (features, labels) = data.to_dense(cfg.feature_scale);
    Ok(MultiLossInstance { features, labels, beta })
}

fn portfolio_instance(cfg: &RunConfig) -> Result<PortfolioInstance, CliError> {
    let returns = match &cfg.data {
        Some(path) => read_returns_csv(path, cfg.skip_header)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
        None => synthetic_returns(40, 4, 5),
    };
    Ok(PortfolioInstance {
        returns,
        cvar_beta: cfg.cvar_beta.unwrap_or(0.1),
        rho: cfg.rho.unwrap_or(2.0),
        gamma: cfg.gamma.unwrap_or(0.05),
    })
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// The selected problem with any `sigma_*` overrides applied.
pub fn build_problem(cfg: &RunConfig) -> Result<BuiltinProblem, CliError> {
    let mut bp = match cfg.problem.as_str() {
        "multiloss" => {
            let inst = multiloss_instance(cfg)?;
            let n = inst.features.cols();
            BuiltinProblem {
                name: cfg.problem.clone(),
                problem: multiloss_oracle(&inst).map_err(invalid)?,
                x0: Vector::zeros(n),
                stationary: None,
                radius: None,
            }
        }
        "multiloss-smooth" => {
            let inst = multiloss_instance(cfg)?;
            let n = inst.features.cols();
            let (problem, radius) = multiloss_smooth_oracle(&inst).map_err(invalid)?;
            BuiltinProblem { name: cfg.problem.clone(), problem, x0: Vector::zeros(n), stationary: None, radius: Some(radius) }
        }
        "portfolio" => {
            let inst = portfolio_instance(cfg)?;
            BuiltinProblem {
                name: cfg.problem.clone(),
                problem: portfolio_oracle(&inst).map_err(invalid)?,
                x0: inst.initial_point(),
                stationary: None,
                radius: None,
            }
        }
        name => {
            if cfg.data.is_some() {
                return Err(CliError::Usage(format!("problem {name:?} does not read data files")));
            }
            let all = builtin_problems();
            let names: Vec<String> = all.iter().map(|b| b.name.clone()).collect();
            all.into_iter()
                .find(|b| b.name == name)
                .ok_or_else(|| CliError::Usage(format!("unknown problem {name:?}; known: {}", names.join(", "))))?
        }
    };
    if cfg.sigma_g.is_some() {
        bp.problem.constants.sigma_g = cfg.sigma_g;
    }
    if cfg.sigma_jac.is_some() {
        bp.problem.constants.sigma_jac = cfg.sigma_jac;
    }
    bp.problem.constants.validate().map_err(invalid)?;
    Ok(bp)
}

/// Explicit `M`, else `4 ℓ_f L_g` when that is positive.
pub fn penalty(cfg: &RunConfig, bp: &BuiltinProblem) -> Result<f64, CliError> {
    if let Some(m) = cfg.penalty {
        return if m > 0.0 && m.is_finite() { Ok(m) } else { Err(CliError::Usage(format!("M must be positive, got {m}"))) };
    }
    let c = &bp.problem.constants;
    let m = 4.0 * c.ell_f * c.lip_g;
    if m > 0.0 {
        Ok(m)
    } else {
        Err(CliError::Usage(format!("{} has L_g = 0; set M explicitly", bp.name)))
    }
}

fn need<T: Copy>(v: Option<T>, key: &str, why: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("{why} requires {key}")))
}

fn horizon(cfg: &RunConfig, count_key: &str, count: Option<usize>) -> Result<Horizon, CliError> {
    match (count, cfg.gap) {
        (Some(k), _) => Ok(Horizon::Fixed(k)),
        (None, Some(g)) => Ok(Horizon::ObjectiveGap(g)),
        (None, None) => Err(CliError::Usage(format!("complexity-derived schedules need {count_key} or gap"))),
    }
}

pub fn solver(cfg: &RunConfig) -> SolverOptions {
    SolverOptions { tol: cfg.solver_tol, max_iters: cfg.solver_max_iters }
}

/// Schedule for stochastic algorithms. Deterministic runs use only `M` and
/// `iterations`.
pub fn build_schedule(cfg: &RunConfig, bp: &BuiltinProblem, m: f64) -> Result<Schedule, CliError> {
    let n = bp.problem.regime.finite_n();
    let c = &bp.problem.constants;
    let eps = || need(cfg.epsilon, "epsilon", "complexity-derived schedules");
    let finite_n = || n.ok_or_else(|| CliError::Usage("finite-sum schedule on an expectation problem".into()));
    let sched = match cfg.schedule {
        ScheduleMode::Manual => {
            let why = "manual schedule";
            let spec = |g: Option<usize>, j: Option<usize>, kind: &str, shared: bool| -> Result<BatchSpec, CliError> {
                let g = need(g, &format!("{kind}_g"), why)?;
                let j = need(j, &format!("{kind}_j"), why)?;
                BatchSpec::new(g, j, shared).map_err(invalid)
            };
            match cfg.algorithm {
                Algorithm::Pl => {
                    let n = n.ok_or_else(|| CliError::Usage("pl needs a finite-sum problem".into()))?;
                    Schedule::full_batch(n, need(cfg.iterations, "iterations", "pl")?, m)
                }
                Algorithm::Spl => {
                    let b = spec(cfg.inner_g, cfg.inner_j, "inner", cfg.shared)?;
                    Schedule::uniform(1, need(cfg.iterations, "iterations", "spl")?, b, b, m)
                }
                Algorithm::SvrPl | Algorithm::SarahPl => {
                    let full = |v: Option<usize>| v.or(n);
                    let anchor = spec(full(cfg.anchor_g), full(cfg.anchor_j), "anchor", false)?;
                    let inner = spec(cfg.inner_g, cfg.inner_j, "inner", cfg.shared)?;
                    Schedule::uniform(need(cfg.epochs, "K", why)?, need(cfg.tau, "tau", why)?, anchor, inner, m)
                }
            }
        }
        ScheduleMode::SvrgFinite => schedule_svrg_finite(finite_n()?, eps()?, m, horizon(cfg, "K", cfg.epochs)?)?,
        ScheduleMode::MiniBatch => schedule_minibatch(c, eps()?, m, horizon(cfg, "iterations", cfg.iterations)?)?,
        ScheduleMode::SarahExpectNonsmooth => {
            schedule_sarah_expect_nonsmooth(c, eps()?, m, horizon(cfg, "K", cfg.epochs)?)?
        }
        ScheduleMode::SarahFiniteSmooth => {
            schedule_sarah_finite_smooth(finite_n()?, eps()?, m, horizon(cfg, "K", cfg.epochs)?)?
        }
        ScheduleMode::SarahExpectSmooth => schedule_sarah_expect_smooth(c, eps()?, m, horizon(cfg, "K", cfg.epochs)?)?,
        ScheduleMode::Adaptive => schedule_adaptive(c, need(cfg.epochs, "K", "adaptive schedule")?, m)?,
    };
    let expected_k1 = matches!(cfg.algorithm, Algorithm::Spl | Algorithm::Pl);
    if expected_k1 && sched.k() != 1 {
        return Err(CliError::Usage(format!("{} runs a single epoch; schedule has {}", cfg.algorithm.name(), sched.k())));
    }
    Ok(sched.with_solver(solver(cfg)))
}
