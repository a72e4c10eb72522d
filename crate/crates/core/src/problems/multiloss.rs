//! Four-loss binary classification mapping.
//!
//! For a sample `(a, b)` with `z = b aᵀx` the component is
//! `(1 - tanh z, (1 - σ(z))², log(1+e^{-z}) - log(1+e^{-z-1}), log(1+(z-1)²))`.
//!
//! With `φ` that vector as a function of `z`, `sup ||φ'|| < 1.46` and
//! `sup ||φ''|| < 2.11`, so each component has `ℓ = 1.46 ||a||` and
//! `L = 2.11 ||a||²`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{Matrix, Vector};
use crate::model::{
    ComponentOracle, CompositeProblem, ModelError, OuterFunction, Regularizer, SamplingRegime,
    SmoothnessConstants, Token,
};

pub const PHI_LIPSCHITZ: f64 = 1.46;
pub const PHI_SMOOTHNESS: f64 = 2.11;
/// Half-width of the box on which the squared-norm variant's local `ℓ_f` holds.
pub const SMOOTH_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiLossInstance {
    /// One row per sample.
    pub features: Matrix,
    /// Entries in `{-1, +1}`.
    pub labels: Vec<f64>,
    pub beta: f64,
}

impl MultiLossInstance {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.features.rows() == 0 || self.features.cols() == 0 {
            return Err(ModelError::InvalidParameter("multiloss instance needs data".into()));
        }
        if self.labels.len() != self.features.rows() {
            return Err(ModelError::Dimension {
                what: "labels",
                expected: self.features.rows(),
                got: self.labels.len(),
            });
        }
        if let Some(bad) = self.labels.iter().find(|&&b| b != 1.0 && b != -1.0) {
            return Err(ModelError::InvalidParameter(format!("label {bad} is not +-1")));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("beta must be nonnegative, got {}", self.beta)));
        }
        Ok(())
    }

    fn row_norms_sq(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.features.rows()).map(|i| self.features.row(i).iter().map(|v| v * v).sum::<f64>())
    }

    /// `(ℓ_g, L_g)` as root-mean-square of the per-sample constants.
    pub fn mapping_constants(&self) -> (f64, f64) {
        let n = self.features.rows() as f64;
        let (s2, s4) = self.row_norms_sq().fold((0.0, 0.0), |(a, b), r| (a + r, b + r * r));
        (PHI_LIPSCHITZ * (s2 / n).sqrt(), PHI_SMOOTHNESS * (s4 / n).sqrt())
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// The four losses at `z`.
pub fn phi(z: f64) -> [f64; 4] {
    let s = sigmoid(-z);
    [
        1.0 - z.tanh(),
        s * s,
        softplus(-z) - softplus(-z - 1.0),
        ((z - 1.0) * (z - 1.0)).ln_1p(),
    ]
}

/// Derivative of [`phi`].
pub fn phi_prime(z: f64) -> [f64; 4] {
    let th = z.tanh();
    let s = sigmoid(-z);
    let w = z - 1.0;
    [
        -(1.0 - th * th),
        -2.0 * s * s * (1.0 - s),
        -s + sigmoid(-z - 1.0),
        2.0 * w / (1.0 + w * w),
    ]
}

/// Second derivative of [`phi`].
pub fn phi_second(z: f64) -> [f64; 4] {
    let th = z.tanh();
    let s = sigmoid(-z);
    let s1 = sigmoid(-z - 1.0);
    let w = z - 1.0;
    let q = 1.0 + w * w;
    [
        2.0 * (1.0 - th * th) * th,
        2.0 * s * s * (2.0 - 3.0 * s) * (1.0 - s),
        s * (1.0 - s) - s1 * (1.0 - s1),
        2.0 * (1.0 - w * w) / (q * q),
    ]
}

#[derive(Debug, Clone)]
pub struct MultiLossOracle {
    features: Arc<Matrix>,
    labels: Arc<Vec<f64>>,
}

impl MultiLossOracle {
    fn z(&self, t: Token, x: &Vector) -> f64 {
        let a = self.features.row(t);
        self.labels[t] * a.iter().zip(x.iter()).map(|(u, v)| u * v).sum::<f64>()
    }
}

impl ComponentOracle for MultiLossOracle {
    fn dims(&self) -> (usize, usize) {
        (self.features.cols(), 4)
    }

    fn eval_map(&self, t: Token, x: &Vector) -> Vector {
        Vector::from_raw(phi(self.z(t, x)).to_vec())
    }

    fn eval_jac(&self, t: Token, x: &Vector) -> Matrix {
        let dz = phi_prime(self.z(t, x));
        let b = self.labels[t];
        let a = self.features.row(t);
        let mut data = Vec::with_capacity(4 * a.len());
        for d in dz {
            data.extend(a.iter().map(|v| d * b * v));
        }
        Matrix::from_raw(4, a.len(), data)
    }
}

fn oracle(inst: &MultiLossInstance) -> Result<MultiLossOracle, ModelError> {
    inst.validate()?;
    Ok(MultiLossOracle { features: Arc::new(inst.features.clone()), labels: Arc::new(inst.labels.clone()) })
}

/// `||(1/N) Σ g_j(x)||_1 + β ||x||_1`.
pub fn multiloss_oracle(inst: &MultiLossInstance) -> Result<CompositeProblem, ModelError> {
    let oracle = oracle(inst)?;
    let (ell_g, lip_g) = inst.mapping_constants();
    let constants = SmoothnessConstants {
        ell_f: 2.0,
        lip_f: None,
        ell_g: Some(ell_g),
        lip_g,
        sigma_g: None,
        sigma_jac: None,
    };
    CompositeProblem::new(
        Arc::new(oracle),
        SamplingRegime::FiniteSum { n: inst.features.rows() },
        OuterFunction::L1Norm,
        Regularizer::L1 { lambda: inst.beta },
        constants,
    )
}

/// `||(1/N) Σ g_j(x)||²`. Returns the problem and the half-width of the box
/// around the origin on which its local `ℓ_f` is valid.
pub fn multiloss_smooth_oracle(inst: &MultiLossInstance) -> Result<(CompositeProblem, f64), ModelError> {
    let oracle = oracle(inst)?;
    let (ell_g, lip_g) = inst.mapping_constants();
    // |z| <= ||a||_1 * R on the box
    let zmax = (0..inst.features.rows())
        .map(|i| inst.features.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        * SMOOTH_RADIUS;
    let r4 = ((zmax + 1.0) * (zmax + 1.0)).ln_1p();
    let gmax = (4.0 + 1.0 + 1.0 + r4 * r4).sqrt();
    let constants = SmoothnessConstants {
        ell_f: 2.0 * gmax,
        lip_f: Some(2.0),
        ell_g: Some(ell_g),
        lip_g,
        sigma_g: None,
        sigma_jac: None,
    };
    let problem = CompositeProblem::new(
        Arc::new(oracle),
        SamplingRegime::FiniteSum { n: inst.features.rows() },
        OuterFunction::SquaredNorm { coeff: 1.0 },
        Regularizer::Zero,
        constants,
    )?;
    Ok((problem, SMOOTH_RADIUS))
}

/// Random features in `[-1, 1]^n / sqrt(n)` with labels from a noisy linear
/// teacher.
pub fn synthetic_multiloss_instance(samples: usize, dim: usize, beta: f64, seed: u64) -> MultiLossInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (dim as f64).sqrt();
    let teacher: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut data = Vec::with_capacity(samples * dim);
    let mut labels = Vec::with_capacity(samples);
    for _ in 0..samples {
        let row: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();
        let score: f64 = row.iter().zip(&teacher).map(|(a, w)| a * w).sum::<f64>() + rng.gen_range(-0.1..0.1);
        labels.push(if score >= 0.0 { 1.0 } else { -1.0 });
        data.extend(row);
    }
    MultiLossInstance { features: Matrix::from_raw(samples, dim, data), labels, beta }
}
