//! Epoch plans and the batch-size schedules that drive them.

use crate::estimators::BatchSpec;
use crate::model::{CompositeProblem, SmoothnessConstants};
use crate::subproblem::SolverOptions;

use super::DriverError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochPlan {
    pub tau: usize,
    pub anchor: BatchSpec,
    pub inner: BatchSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub epochs: Vec<EpochPlan>,
    pub penalty: f64,
    pub epsilon: Option<f64>,
    pub solver: SolverOptions,
}

/// How far to run: a fixed count, or a count derived from an estimate of
/// `Φ(x₀) - Φ*` through the schedule's convergence bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// Epochs, or iterations for the single-epoch mini-batch schedule.
    Fixed(usize),
    ObjectiveGap(f64),
}

impl Schedule {
    pub fn uniform(k: usize, tau: usize, anchor: BatchSpec, inner: BatchSpec, penalty: f64) -> Self {
        Schedule {
            epochs: vec![EpochPlan { tau, anchor, inner }; k],
            penalty,
            epsilon: None,
            solver: SolverOptions::default(),
        }
    }

    /// Full batches every iteration, `T` iterations in one epoch.
    pub fn full_batch(n: usize, iterations: usize, penalty: f64) -> Self {
        Schedule::uniform(1, iterations, BatchSpec::full(n), BatchSpec::full(n), penalty)
    }

    pub fn with_solver(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }

    pub fn k(&self) -> usize {
        self.epochs.len()
    }

    pub fn total_iterations(&self) -> usize {
        self.epochs.iter().map(|e| e.tau).sum()
    }

    /// `Σ_k (anchor + (τ_k - 1) inner)` for mappings and Jacobians.
    pub fn implied_calls(&self) -> (u64, u64) {
        self.epochs.iter().fold((0, 0), |(g, j), e| {
            let rest = (e.tau - 1) as u64;
            (
                g + e.anchor.size_g as u64 + rest * e.inner.size_g as u64,
                j + e.anchor.size_j as u64 + rest * e.inner.size_j as u64,
            )
        })
    }

    pub fn validate(&self, problem: &CompositeProblem) -> Result<(), DriverError> {
        let bad = |msg: String| Err(DriverError::Schedule(msg));
        if self.epochs.is_empty() {
            return bad("schedule has no epochs".into());
        }
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return bad(format!("penalty must be positive, got {}", self.penalty));
        }
        for (k, e) in self.epochs.iter().enumerate() {
            if e.tau == 0 {
                return bad(format!("epoch {} has tau = 0", k + 1));
            }
            for spec in [&e.anchor, &e.inner] {
                spec.validate().map_err(|err| DriverError::Schedule(format!("epoch {}: {err}", k + 1)))?;
                if let Some(n) = problem.regime.finite_n() {
                    let size = spec.size_g.max(spec.size_j);
                    if size > n {
                        return bad(format!("epoch {}: batch of {size} exceeds N = {n}", k + 1));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Ceiling that ignores floating-point noise just above an integer, clamped
/// to at least 1.
pub fn batch_ceil(v: f64) -> usize {
    let r = v.round();
    let c = if (v - r).abs() <= 1e-9 * r.abs().max(1.0) { r } else { v.ceil() };
    if c < 1.0 {
        1
    } else {
        c as usize
    }
}

fn check_epsilon(epsilon: f64) -> Result<(), DriverError> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(DriverError::Schedule(format!("epsilon must be positive, got {epsilon}")))
    }
}

fn require(value: Option<f64>, name: &str) -> Result<f64, DriverError> {
    value.ok_or_else(|| DriverError::Schedule(format!("schedule needs the constant {name}")))
}

fn positive_lip_g(c: &SmoothnessConstants) -> Result<f64, DriverError> {
    if c.lip_g > 0.0 {
        Ok(c.lip_g)
    } else {
        Err(DriverError::Schedule("schedule needs L_g > 0".into()))
    }
}

fn epochs(horizon: Horizon, bound_scale: f64, epsilon: f64, tau: usize) -> Result<usize, DriverError> {
    match horizon {
        Horizon::Fixed(0) => Err(DriverError::Schedule("horizon must be at least 1".into())),
        Horizon::Fixed(k) => Ok(k),
        Horizon::ObjectiveGap(gap) if gap >= 0.0 && gap.is_finite() => {
            Ok(batch_ceil(bound_scale * gap / (epsilon * tau as f64)))
        }
        Horizon::ObjectiveGap(gap) => Err(DriverError::Schedule(format!("objective gap must be nonnegative, got {gap}"))),
    }
}

fn finished(epochs: Vec<EpochPlan>, penalty: f64, epsilon: f64) -> Schedule {
    Schedule { epochs, penalty, epsilon: Some(epsilon), solver: SolverOptions::default() }
}

/// Corrected-SVRG schedule for finite sums with nonsmooth `f`.
///
/// `τ = ⌈N^{1/5}/2 - 1⌉` (at least 1), `B = ⌈4 N^{4/5}⌉`, `S = ⌈N^{2/5}⌉`,
/// full anchors, shared inner batches. The gap horizon uses the bound
/// `15 M gap / (K τ)`.
pub fn schedule_svrg_finite(n: usize, epsilon: f64, penalty: f64, horizon: Horizon) -> Result<Schedule, DriverError> {
    check_epsilon(epsilon)?;
    let nf = n as f64;
    let tau = batch_ceil(0.5 * nf.powf(0.2) - 1.0);
    let b = batch_ceil(4.0 * nf.powf(0.8));
    let s = batch_ceil(nf.powf(0.4));
    let k = epochs(horizon, 15.0 * penalty, epsilon, tau)?;
    let plan = EpochPlan {
        tau,
        anchor: BatchSpec::full(n),
        inner: BatchSpec { size_g: b, size_j: s, shared: s <= b },
    };
    Ok(finished(vec![plan; k], penalty, epsilon))
}

/// Single-epoch mini-batch schedule.
///
/// `B = ⌈36 ℓ_f² σ_g² / ε²⌉`, `S = ⌈2 ℓ_f σ_{g'}² / (L_g ε)⌉`; the gap
/// horizon gives `T = ⌈gap / ε⌉`.
pub fn schedule_minibatch(
    c: &SmoothnessConstants,
    epsilon: f64,
    penalty: f64,
    horizon: Horizon,
) -> Result<Schedule, DriverError> {
    check_epsilon(epsilon)?;
    let sg = require(c.sigma_g, "sigma_g")?;
    let sj = require(c.sigma_jac, "sigma_jac")?;
    let lg = positive_lip_g(c)?;
    let b = batch_ceil(36.0 * c.ell_f.powi(2) * sg * sg / (epsilon * epsilon));
    let s = batch_ceil(2.0 * c.ell_f * sj * sj / (lg * epsilon));
    let t = epochs(horizon, 1.0, epsilon, 1)?;
    let spec = BatchSpec { size_g: b, size_j: s, shared: s <= b };
    Ok(finished(vec![EpochPlan { tau: t, anchor: spec, inner: spec }], penalty, epsilon))
}

/// SARAH schedule for expectations with nonsmooth `f`.
///
/// `τ = ⌈ε^{-1/2}⌉`, `B₀ = ⌈25 ℓ_f² σ_g² / (4ε²)⌉`,
/// `S₀ = ⌈3 ℓ_f σ_{g'}² / (4 M L_g ε)⌉`, `b = ⌈25 ℓ_f² ℓ_g² / (M ε^{3/2})⌉`,
/// `s = ⌈12 ℓ_f L_g / (M ε^{1/2})⌉`. The gap horizon gives `K = ⌈gap / (ε τ)⌉`.
pub fn schedule_sarah_expect_nonsmooth(
    c: &SmoothnessConstants,
    epsilon: f64,
    penalty: f64,
    horizon: Horizon,
) -> Result<Schedule, DriverError> {
    check_epsilon(epsilon)?;
    let sg = require(c.sigma_g, "sigma_g")?;
    let sj = require(c.sigma_jac, "sigma_jac")?;
    let eg = require(c.ell_g, "ell_g")?;
    let lg = positive_lip_g(c)?;
    let lf = c.ell_f;
    let tau = batch_ceil(epsilon.powf(-0.5));
    let anchor = BatchSpec {
        size_g: batch_ceil(25.0 * lf * lf * sg * sg / (4.0 * epsilon * epsilon)),
        size_j: batch_ceil(3.0 * lf * sj * sj / (4.0 * penalty * lg * epsilon)),
        shared: false,
    };
    let inner = BatchSpec {
        size_g: batch_ceil(25.0 * lf * lf * eg * eg / (penalty * epsilon.powf(1.5))),
        size_j: batch_ceil(12.0 * lf * lg / (penalty * epsilon.sqrt())),
        shared: false,
    };
    let k = epochs(horizon, 1.0, epsilon, tau)?;
    Ok(finished(vec![EpochPlan { tau, anchor, inner }; k], penalty, epsilon))
}

/// SARAH schedule for smooth finite sums: `τ = ⌈√N⌉`, inner batches
/// `2⌈√N⌉`, full anchors. The gap horizon uses `24 M gap / (K τ)`.
pub fn schedule_sarah_finite_smooth(
    n: usize,
    epsilon: f64,
    penalty: f64,
    horizon: Horizon,
) -> Result<Schedule, DriverError> {
    check_epsilon(epsilon)?;
    let tau = batch_ceil((n as f64).sqrt());
    let inner = BatchSpec { size_g: 2 * tau, size_j: 2 * tau, shared: false };
    let k = epochs(horizon, 24.0 * penalty, epsilon, tau)?;
    Ok(finished(vec![EpochPlan { tau, anchor: BatchSpec::full(n), inner }; k], penalty, epsilon))
}

fn smooth_expect_plan(c: &SmoothnessConstants, eps: f64) -> Result<EpochPlan, DriverError> {
    let lf_grad = require(c.lip_f, "L_f")?;
    let sg = require(c.sigma_g, "sigma_g")?;
    let sj = require(c.sigma_jac, "sigma_jac")?;
    let lg = positive_lip_g(c)?;
    let root = batch_ceil(eps.powf(-0.5));
    Ok(EpochPlan {
        tau: root,
        anchor: BatchSpec {
            size_g: batch_ceil(11.0 * lf_grad * sg * sg / (4.0 * eps)),
            size_j: batch_ceil(3.0 * c.ell_f * c.ell_f * sj * sj / (2.0 * lg * eps)),
            shared: false,
        },
        inner: BatchSpec { size_g: 2 * root, size_j: 2 * root, shared: false },
    })
}

/// SARAH schedule for expectations with smooth `f`.
///
/// `τ = ⌈ε^{-1/2}⌉`, `B₀ = ⌈11 L_f σ_g² / (4ε)⌉`,
/// `S₀ = ⌈3 ℓ_f² σ_{g'}² / (2 L_g ε)⌉`, inner batches `2⌈ε^{-1/2}⌉`. The gap
/// horizon gives `K = ⌈gap / (ε τ)⌉`.
pub fn schedule_sarah_expect_smooth(
    c: &SmoothnessConstants,
    epsilon: f64,
    penalty: f64,
    horizon: Horizon,
) -> Result<Schedule, DriverError> {
    check_epsilon(epsilon)?;
    let plan = smooth_expect_plan(c, epsilon)?;
    let k = epochs(horizon, 1.0, epsilon, plan.tau)?;
    Ok(finished(vec![plan; k], penalty, epsilon))
}

/// Epoch `k` uses the smooth-expectation formulas at `ε_k = k⁻²`, so
/// `τ_k = k`.
pub fn schedule_adaptive(c: &SmoothnessConstants, k: usize, penalty: f64) -> Result<Schedule, DriverError> {
    if k == 0 {
        return Err(DriverError::Schedule("adaptive schedule needs K >= 1".into()));
    }
    let epochs = (1..=k)
        .map(|e| smooth_expect_plan(c, 1.0 / (e * e) as f64))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Schedule { epochs, penalty, epsilon: None, solver: SolverOptions::default() })
}
