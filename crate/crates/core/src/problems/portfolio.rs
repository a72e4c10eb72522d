//! Mean-CVaR portfolio selection with an exact-penalty hinge.
//!
//! Variables are `(w, τ) ∈ R^{d+1}` with `w` on the simplex. Component `i`
//! maps to `(-r_iᵀw, τ + s(r_iᵀw + τ))` where
//! `s(u) = (√(u² + γ²) - u - γ) / (2β)` smooths `max(-u, 0) / β`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{Matrix, Vector};
use crate::model::{
    ComponentOracle, CompositeProblem, ModelError, OuterFunction, Regularizer, SamplingRegime,
    SmoothnessConstants, Token,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioInstance {
    /// One row of asset returns per period.
    pub returns: Matrix,
    pub cvar_beta: f64,
    pub rho: f64,
    pub gamma: f64,
}

impl PortfolioInstance {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidParameter(msg));
        if self.returns.rows() == 0 || self.returns.cols() == 0 {
            return bad("portfolio instance needs returns".into());
        }
        if !(self.cvar_beta > 0.0 && self.cvar_beta < 1.0) {
            return bad(format!("cvar level must be in (0, 1), got {}", self.cvar_beta));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        Ok(())
    }

    pub fn assets(&self) -> usize {
        self.returns.cols()
    }

    /// Uniform weights and `τ = 0`.
    pub fn initial_point(&self) -> Vector {
        let d = self.assets();
        let mut x = vec![1.0 / d as f64; d];
        x.push(0.0);
        Vector::from_raw(x)
    }
}

/// Smoothed hinge `s(u)` and its derivative.
pub fn smoothed_hinge(u: f64, beta: f64, gamma: f64) -> (f64, f64) {
    let r = u.hypot(gamma);
    ((r - u - gamma) / (2.0 * beta), (u / r - 1.0) / (2.0 * beta))
}

#[derive(Debug, Clone)]
pub struct PortfolioOracle {
    returns: Arc<Matrix>,
    beta: f64,
    gamma: f64,
}

impl PortfolioOracle {
    fn split<'a>(&self, x: &'a Vector) -> (&'a [f64], f64) {
        let d = self.returns.cols();
        (&x.as_slice()[..d], x[d])
    }

    fn ret(&self, t: Token, w: &[f64]) -> f64 {
        self.returns.row(t).iter().zip(w).map(|(a, b)| a * b).sum()
    }
}

impl ComponentOracle for PortfolioOracle {
    fn dims(&self) -> (usize, usize) {
        (self.returns.cols() + 1, 2)
    }

    fn eval_map(&self, t: Token, x: &Vector) -> Vector {
        let (w, tau) = self.split(x);
        let rw = self.ret(t, w);
        let (s, _) = smoothed_hinge(rw + tau, self.beta, self.gamma);
        Vector::from_raw(vec![-rw, tau + s])
    }

    fn eval_jac(&self, t: Token, x: &Vector) -> Matrix {
        let (w, tau) = self.split(x);
        let r = self.returns.row(t);
        let (_, ds) = smoothed_hinge(self.ret(t, w) + tau, self.beta, self.gamma);
        let n = r.len() + 1;
        let mut data = Vec::with_capacity(2 * n);
        data.extend(r.iter().map(|v| -v));
        data.push(0.0);
        data.extend(r.iter().map(|v| ds * v));
        data.push(1.0 + ds);
        Matrix::from_raw(2, n, data)
    }
}

/// `-(mean r)ᵀw + ρ max(0, τ + mean s(r_iᵀw + τ))` over the simplex.
pub fn portfolio_oracle(inst: &PortfolioInstance) -> Result<CompositeProblem, ModelError> {
    inst.validate()?;
    let (beta, gamma) = (inst.cvar_beta, inst.gamma);
    let rows = inst.returns.rows();
    let norms_sq: Vec<f64> =
        (0..rows).map(|i| inst.returns.row(i).iter().map(|v| v * v).sum()).collect();
    let corner = (1.0f64).max(1.0 / beta - 1.0);
    let ell_sq: f64 = norms_sq
        .iter()
        .map(|r| r * (1.0 + 1.0 / (beta * beta)) + corner * corner)
        .sum::<f64>()
        / rows as f64;
    let lip_sq: f64 =
        norms_sq.iter().map(|r| ((r + 1.0) / (2.0 * beta * gamma)).powi(2)).sum::<f64>() / rows as f64;
    let constants = SmoothnessConstants {
        ell_f: (1.0 + inst.rho * inst.rho).sqrt(),
        lip_f: None,
        ell_g: Some(ell_sq.sqrt()),
        lip_g: lip_sq.sqrt(),
        sigma_g: None,
        sigma_jac: None,
    };
    let oracle = PortfolioOracle { returns: Arc::new(inst.returns.clone()), beta, gamma };
    CompositeProblem::new(
        Arc::new(oracle),
        SamplingRegime::FiniteSum { n: rows },
        OuterFunction::AffinePlusHinge { rho: inst.rho },
        Regularizer::SimplexIndicator { d: inst.assets() },
        constants,
    )
}

/// Per-period returns around small random asset means.
pub fn synthetic_returns(periods: usize, assets: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<f64> = (0..assets).map(|_| rng.gen_range(-0.01..0.02)).collect();
    let vols: Vec<f64> = (0..assets).map(|_| rng.gen_range(0.01..0.08)).collect();
    let mut data = Vec::with_capacity(periods * assets);
    for _ in 0..periods {
        for k in 0..assets {
            data.push(means[k] + vols[k] * rng.gen_range(-1.0..1.0));
        }
    }
    Matrix::from_raw(periods, assets, data)
}
