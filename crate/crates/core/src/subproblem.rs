//! Solvers for the prox-linear model
//!
//! ```text
//! min_x  f(g̃ + J̃ (x - x̄)) + h(x) + (M/2) ||x - x̄||²
//! ```
//!
//! Squared-norm outers with no regularizer use a damped Gauss-Newton solve,
//! scalar truncated outers use a closed form, and everything else goes
//! through projected-gradient ascent on the Fenchel dual.

use nalgebra::{Cholesky, DVector};
use thiserror::Error;

use crate::linalg::{Matrix, Vector};
use crate::model::{OuterFunction, Regularizer};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubproblemError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("dual solver stopped after {iters} iterations with gap {gap:e}")]
    MaxIters { iters: usize, gap: f64, best: Box<SubproblemSolution> },
    #[error("linear system is not positive definite")]
    NotPositiveDefinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-9, max_iters: 100_000 }
    }
}

/// One linearized model around `x_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxLinearModel {
    pub x_bar: Vector,
    pub g_tilde: Vector,
    pub j_tilde: Matrix,
    pub penalty: f64,
    pub outer: OuterFunction,
    pub reg: Regularizer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub x_plus: Vector,
    pub dual_y: Option<Vector>,
    pub gap: f64,
    pub iters: usize,
    pub degenerate_jacobian: bool,
}

impl ProxLinearModel {
    pub fn n(&self) -> usize {
        self.x_bar.len()
    }

    pub fn m(&self) -> usize {
        self.g_tilde.len()
    }

    pub fn validate(&self) -> Result<(), SubproblemError> {
        let bad = |msg: String| Err(SubproblemError::InvalidModel(msg));
        if self.j_tilde.shape() != (self.m(), self.n()) {
            return bad(format!(
                "jacobian is {:?}, expected ({}, {})",
                self.j_tilde.shape(),
                self.m(),
                self.n()
            ));
        }
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return bad(format!("penalty must be positive, got {}", self.penalty));
        }
        if !self.x_bar.is_finite() || !self.g_tilde.is_finite() || !self.j_tilde.is_finite() {
            return bad("non-finite model data".into());
        }
        if let Some(req) = self.outer.required_m() {
            if req != self.m() {
                return bad(format!("outer function needs m = {req}, got {}", self.m()));
            }
        }
        if let Regularizer::SimplexIndicator { d } = self.reg {
            if d == 0 || d > self.n() {
                return bad(format!("simplex block {d} out of range for n = {}", self.n()));
            }
        }
        Ok(())
    }

    /// Model value at `x`.
    pub fn value(&self, x: &Vector) -> f64 {
        let d = x.sub(&self.x_bar);
        self.value_at_step(&d)
    }

    fn value_at_step(&self, d: &Vector) -> f64 {
        let z = self.g_tilde.add_scaled(1.0, &self.j_tilde.mul_vec(d));
        let x = self.x_bar.add_scaled(1.0, d);
        self.outer.value(&z) + self.reg.value(&x) + 0.5 * self.penalty * d.norm_sq()
    }
}

/// Solves the model, dispatching to the closed forms where they apply.
pub fn solve(model: &ProxLinearModel, opts: &SolverOptions) -> Result<SubproblemSolution, SubproblemError> {
    model.validate()?;
    match (model.outer, model.reg) {
        (OuterFunction::SquaredNorm { .. }, Regularizer::Zero) => solve_gauss_newton(model),
        (OuterFunction::TruncatedIdentity { .. }, Regularizer::Zero) => solve_truncated(model),
        _ => solve_dual(model, opts),
    }
}

/// Damped Gauss-Newton step for `f = c ||·||²`, `h = 0`.
pub fn solve_gauss_newton(model: &ProxLinearModel) -> Result<SubproblemSolution, SubproblemError> {
    model.validate()?;
    let c = match (model.outer, model.reg) {
        (OuterFunction::SquaredNorm { coeff }, Regularizer::Zero) => coeff,
        _ => return Err(SubproblemError::InvalidModel("gauss-newton needs squared norm and h = 0".into())),
    };
    let (m, n) = model.j_tilde.shape();
    let mu = model.penalty;
    let j = model.j_tilde.to_nalgebra();
    let g = DVector::from_column_slice(model.g_tilde.as_slice());
    let d = if m < n {
        // d = -2c Jᵀ (M I + 2c J Jᵀ)⁻¹ g
        let mut sys = &j * j.transpose() * (2.0 * c);
        for i in 0..m {
            sys[(i, i)] += mu;
        }
        let w = Cholesky::new(sys).ok_or(SubproblemError::NotPositiveDefinite)?.solve(&g);
        j.transpose() * w * (-2.0 * c)
    } else {
        // (M I + 2c JᵀJ) d = -2c Jᵀ g
        let mut sys = j.transpose() * &j * (2.0 * c);
        for i in 0..n {
            sys[(i, i)] += mu;
        }
        let rhs = j.transpose() * &g * (-2.0 * c);
        Cholesky::new(sys).ok_or(SubproblemError::NotPositiveDefinite)?.solve(&rhs)
    };
    let d = Vector::from_raw(d.as_slice().to_vec());
    let z = model.g_tilde.add_scaled(1.0, &model.j_tilde.mul_vec(&d));
    Ok(SubproblemSolution {
        x_plus: model.x_bar.add_scaled(1.0, &d),
        dual_y: Some(z.scale(2.0 * c)),
        gap: 0.0,
        iters: 0,
        degenerate_jacobian: false,
    })
}

/// Closed form for `f(z) = max(z, g*)` with `m = 1`, `h = 0`.
pub fn solve_truncated(model: &ProxLinearModel) -> Result<SubproblemSolution, SubproblemError> {
    model.validate()?;
    let floor = match (model.outer, model.reg) {
        (OuterFunction::TruncatedIdentity { floor }, Regularizer::Zero) => floor,
        _ => return Err(SubproblemError::InvalidModel("truncated path needs max(z, g*) and h = 0".into())),
    };
    let excess = model.g_tilde[0] - floor;
    let row = Vector::from_raw(model.j_tilde.row(0).to_vec());
    let jn = row.norm_sq();
    let mu = model.penalty;
    let (alpha, degenerate) = if excess <= 0.0 {
        (0.0, false)
    } else if jn == 0.0 {
        (0.0, true)
    } else {
        ((excess / jn).min(1.0 / mu), false)
    };
    Ok(SubproblemSolution {
        x_plus: model.x_bar.add_scaled(-alpha, &row),
        dual_y: Some(Vector::from_raw(vec![alpha * mu])),
        gap: 0.0,
        iters: 0,
        degenerate_jacobian: degenerate,
    })
}

/// Projected-gradient ascent on the Fenchel dual of the model.
pub fn solve_dual(model: &ProxLinearModel, opts: &SolverOptions) -> Result<SubproblemSolution, SubproblemError> {
    model.validate()?;
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(SubproblemError::InvalidModel(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let outer = model.outer;
    let mu = model.penalty;
    let j = &model.j_tilde;
    let x_bar = &model.x_bar;

    let jn = spectral_norm(j);
    let lip = (jn * jn / mu + outer.conjugate_curvature()).max(1e-12);
    let step = 1.0 / lip;

    // d(y) = prox_{h/M}(x̄ - J̃ᵀy/M) - x̄
    let primal_step = |y: &Vector| -> Vector {
        let v = x_bar.add_scaled(-1.0 / mu, &j.tr_mul_vec(y));
        model.reg.prox(&v, 1.0 / mu).sub(x_bar)
    };

    let mut y = outer.project_dual(&Vector::zeros(model.m()));
    let mut best_primal = f64::INFINITY;
    let mut best_d = Vector::zeros(model.n());
    let mut best_dual = f64::NEG_INFINITY;
    let mut best_y = y.clone();
    let base = model.value_at_step(&Vector::zeros(model.n()));
    if base.is_finite() {
        best_primal = base;
    }

    let mut gap = f64::INFINITY;
    for iter in 0..=opts.max_iters {
        let d = primal_step(&y);
        let jd = j.mul_vec(&d);
        let z = model.g_tilde.add_scaled(1.0, &jd);
        let x = x_bar.add_scaled(1.0, &d);
        let hx = model.reg.value(&x);
        let prox_term = hx + 0.5 * mu * d.norm_sq();

        let dual = y.dot(&z) - outer.conjugate_value(&y) + prox_term;
        if dual > best_dual {
            best_dual = dual;
            best_y = y.clone();
        }
        let primal = outer.value(&z) + prox_term;
        if primal < best_primal {
            best_primal = primal;
            best_d = d.clone();
        }
        gap = (best_primal - best_dual).max(0.0);
        if gap <= opts.tol {
            return Ok(SubproblemSolution {
                x_plus: x_bar.add_scaled(1.0, &best_d),
                dual_y: Some(best_y),
                gap,
                iters: iter,
                degenerate_jacobian: false,
            });
        }
        if iter == opts.max_iters {
            break;
        }
        // ∇D(y) = g̃ + J̃ d(y) - ∇f*(y)
        let grad = z.sub(&outer.conjugate_gradient(&y));
        y = outer.project_dual(&y.add_scaled(step, &grad));
    }
    let best = SubproblemSolution {
        x_plus: x_bar.add_scaled(1.0, &best_d),
        dual_y: Some(best_y),
        gap,
        iters: opts.max_iters,
        degenerate_jacobian: false,
    };
    Err(SubproblemError::MaxIters { iters: opts.max_iters, gap, best: Box::new(best) })
}

/// Largest singular value by power iteration on the smaller Gram matrix.
pub fn spectral_norm(j: &Matrix) -> f64 {
    let gram = if j.rows() <= j.cols() { j.gram_rows() } else { j.gram_cols() };
    let k = gram.rows();
    if k == 0 {
        return 0.0;
    }
    let start = (0..k)
        .max_by(|&a, &b| gram.get(a, a).total_cmp(&gram.get(b, b)))
        .unwrap();
    if gram.get(start, start) == 0.0 {
        return 0.0;
    }
    let mut v = Vector::from_raw((0..k).map(|i| if i == start { 1.0 } else { 1e-3 }).collect());
    v.scale_mut(1.0 / v.norm());
    let mut lambda = 0.0;
    for _ in 0..200 {
        let w = gram.mul_vec(&v);
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            break;
        }
        v = w.scale(1.0 / norm);
        let done = (next - lambda).abs() <= 1e-12 * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    let w = gram.mul_vec(&v);
    lambda.max(v.dot(&w)).max(0.0).sqrt()
}
