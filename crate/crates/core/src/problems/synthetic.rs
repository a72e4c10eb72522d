//! Small synthetic instances with exact constants.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::BuiltinProblem;
use crate::linalg::{Matrix, Vector};
use crate::model::{
    ComponentOracle, CompositeProblem, OuterFunction, Regularizer, SamplingRegime, SmoothnessConstants, Token,
};

/// `g_i(x) = ½ q_i ||x||² + A_i x + b_i`, with `q_i ∈ R^m`.
///
/// `J_i(x) - J_i(y) = q_i (x - y)ᵀ`, so component `i` has Jacobian
/// Lipschitz constant `||q_i||`.
#[derive(Debug, Clone)]
pub struct QuadraticRowsOracle {
    pub q: Vec<Vector>,
    pub a: Vec<Matrix>,
    pub b: Vec<Vector>,
}

impl QuadraticRowsOracle {
    pub fn random(count: usize, dim: usize, m: usize, curvature: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = Vec::with_capacity(count);
        let mut a = Vec::with_capacity(count);
        let mut b = Vec::with_capacity(count);
        for _ in 0..count {
            q.push(uniform_vector(&mut rng, m, curvature));
            a.push(Matrix::from_raw(m, dim, (0..m * dim).map(|_| rng.gen_range(-1.0..1.0)).collect()));
            b.push(uniform_vector(&mut rng, m, 1.0));
        }
        QuadraticRowsOracle { q, a, b }
    }

    /// Root-mean-square of `||q_i||`.
    pub fn lip_g(&self) -> f64 {
        (self.q.iter().map(|q| q.norm_sq()).sum::<f64>() / self.q.len() as f64).sqrt()
    }
}

impl ComponentOracle for QuadraticRowsOracle {
    fn dims(&self) -> (usize, usize) {
        (self.a[0].cols(), self.a[0].rows())
    }

    fn eval_map(&self, t: Token, x: &Vector) -> Vector {
        let mut out = self.a[t].mul_vec(x);
        out.axpy(1.0, &self.b[t]);
        out.axpy(0.5 * x.norm_sq(), &self.q[t]);
        out
    }

    fn eval_jac(&self, t: Token, x: &Vector) -> Matrix {
        self.a[t].add_scaled(1.0, &Matrix::outer(&self.q[t], x))
    }
}

/// `g_i(x) = A_i x - b_i`.
#[derive(Debug, Clone)]
pub struct AffineOracle {
    pub a: Vec<Matrix>,
    pub b: Vec<Vector>,
}

impl ComponentOracle for AffineOracle {
    fn dims(&self) -> (usize, usize) {
        (self.a[0].cols(), self.a[0].rows())
    }

    fn eval_map(&self, t: Token, x: &Vector) -> Vector {
        self.a[t].mul_vec(x).sub(&self.b[t])
    }

    fn eval_jac(&self, t: Token, _x: &Vector) -> Matrix {
        self.a[t].clone()
    }
}

/// `g_i(x) = ½ (a_iᵀx - b_i)²`.
#[derive(Debug, Clone)]
pub struct SquaredResidualOracle {
    pub a: Vec<Vector>,
    pub b: Vec<f64>,
}

impl ComponentOracle for SquaredResidualOracle {
    fn dims(&self) -> (usize, usize) {
        (self.a[0].len(), 1)
    }

    fn eval_map(&self, t: Token, x: &Vector) -> Vector {
        let r = self.a[t].dot(x) - self.b[t];
        Vector::from_raw(vec![0.5 * r * r])
    }

    fn eval_jac(&self, t: Token, x: &Vector) -> Matrix {
        let r = self.a[t].dot(x) - self.b[t];
        Matrix::from_raw(1, x.len(), self.a[t].scale(r).into_vec())
    }
}

fn uniform_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vector {
    Vector::from_raw((0..n).map(|_| rng.gen_range(-scale..scale)).collect())
}

fn finite(
    oracle: impl ComponentOracle + 'static,
    count: usize,
    outer: OuterFunction,
    reg: Regularizer,
    constants: SmoothnessConstants,
) -> CompositeProblem {
    CompositeProblem::new(Arc::new(oracle), SamplingRegime::FiniteSum { n: count }, outer, reg, constants)
        .expect("synthetic instance is valid")
}

fn rms_spectral(mats: &[Matrix]) -> f64 {
    let s: f64 = mats.iter().map(|m| crate::subproblem::spectral_norm(m).powi(2)).sum();
    (s / mats.len() as f64).sqrt()
}

/// Quadratic-row mapping under an ℓ1 outer, used for estimator variance tests.
pub fn quadratic_rows(count: usize, dim: usize, m: usize, seed: u64) -> BuiltinProblem {
    let oracle = QuadraticRowsOracle::random(count, dim, m, 1.0, seed);
    let constants = SmoothnessConstants {
        ell_f: (m as f64).sqrt(),
        lip_g: oracle.lip_g(),
        ..Default::default()
    };
    BuiltinProblem {
        name: "quadratic-rows".into(),
        problem: finite(oracle, count, OuterFunction::L1Norm, Regularizer::Zero, constants),
        x0: Vector::zeros(dim),
        stationary: None,
        radius: None,
    }
}

/// `max_r (1/N) Σ g_{i,r}(x)` over the simplex.
pub fn minimax(count: usize, dim: usize, m: usize, seed: u64) -> BuiltinProblem {
    let oracle = QuadraticRowsOracle::random(count, dim, m, 1.0, seed);
    let constants = SmoothnessConstants { ell_f: 1.0, lip_g: oracle.lip_g(), ..Default::default() };
    BuiltinProblem {
        name: "minimax".into(),
        problem: finite(oracle, count, OuterFunction::MaxCoordinate, Regularizer::SimplexIndicator { d: dim }, constants),
        x0: Vector::filled(dim, 1.0 / dim as f64),
        stationary: None,
        radius: None,
    }
}

/// `||(1/N) Σ (A_i x - b_i)||²`; stationary at the least-squares solution of
/// the averaged system.
pub fn least_squares(count: usize, dim: usize, m: usize, seed: u64) -> BuiltinProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<Matrix> = (0..count)
        .map(|_| Matrix::from_raw(m, dim, (0..m * dim).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect();
    let b: Vec<Vector> = (0..count).map(|_| uniform_vector(&mut rng, m, 1.0)).collect();
    let mut a_bar = Matrix::zeros(m, dim);
    let mut b_bar = Vector::zeros(m);
    for (ai, bi) in a.iter().zip(&b) {
        a_bar.axpy(1.0 / count as f64, ai);
        b_bar.axpy(1.0 / count as f64, bi);
    }
    let sol = a_bar
        .to_nalgebra()
        .svd(true, true)
        .solve(&DVector::from_column_slice(b_bar.as_slice()), 1e-12)
        .expect("svd has both factors");
    let radius = 10.0;
    // sup ||A x - b|| over the box, times 2c
    let gmax = crate::subproblem::spectral_norm(&a_bar) * radius * (dim as f64).sqrt() + b_bar.norm();
    let constants = SmoothnessConstants {
        ell_f: 2.0 * gmax,
        lip_f: Some(2.0),
        ell_g: Some(rms_spectral(&a)),
        lip_g: 0.0,
        ..Default::default()
    };
    BuiltinProblem {
        name: "least-squares".into(),
        problem: finite(AffineOracle { a, b }, count, OuterFunction::SquaredNorm { coeff: 1.0 }, Regularizer::Zero, constants),
        x0: Vector::zeros(dim),
        stationary: Some(Vector::from_raw(sol.as_slice().to_vec())),
        radius: Some(radius),
    }
}

/// `||(1/N) Σ (x + c_i)||_1`; stationary at `-mean(c)`.
pub fn shifted_identity(count: usize, dim: usize, seed: u64) -> BuiltinProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts: Vec<Vector> = (0..count).map(|_| uniform_vector(&mut rng, dim, 1.0)).collect();
    let mut mean = Vector::zeros(dim);
    for c in &shifts {
        mean.axpy(1.0 / count as f64, c);
    }
    let oracle = AffineOracle { a: vec![Matrix::identity(dim); count], b: shifts.iter().map(|c| c.scale(-1.0)).collect() };
    let constants = SmoothnessConstants {
        ell_f: (dim as f64).sqrt(),
        ell_g: Some(1.0),
        lip_g: 0.0,
        ..Default::default()
    };
    BuiltinProblem {
        name: "shifted-identity".into(),
        problem: finite(oracle, count, OuterFunction::L1Norm, Regularizer::Zero, constants),
        x0: Vector::filled(dim, 1.0),
        stationary: Some(mean.scale(-1.0)),
        radius: None,
    }
}

/// `((1/N) Σ (1 + c_i) x)² = x²` with `mean(c) = 0`.
pub fn scalar_quadratic(count: usize, seed: u64) -> BuiltinProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c: Vec<f64> = (0..count).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let mean = c.iter().sum::<f64>() / count as f64;
    c.iter_mut().for_each(|v| *v -= mean);
    let slopes: Vec<Matrix> = c.iter().map(|v| Matrix::from_raw(1, 1, vec![1.0 + v])).collect();
    let radius = 10.0;
    let constants = SmoothnessConstants {
        ell_f: 2.0 * radius,
        lip_f: Some(2.0),
        ell_g: Some(rms_spectral(&slopes)),
        lip_g: 0.0,
        ..Default::default()
    };
    let oracle = AffineOracle { a: slopes, b: vec![Vector::zeros(1); count] };
    BuiltinProblem {
        name: "scalar-quadratic".into(),
        problem: finite(oracle, count, OuterFunction::SquaredNorm { coeff: 1.0 }, Regularizer::Zero, constants),
        x0: Vector::filled(1, 3.0),
        stationary: Some(Vector::zeros(1)),
        radius: Some(radius),
    }
}

/// `max((1/N) Σ ½ (a_iᵀx - b_i)², 0)` with a consistent system, so the
/// planted point is a minimizer.
pub fn truncated_sg(count: usize, dim: usize, seed: u64) -> BuiltinProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted = uniform_vector(&mut rng, dim, 1.0);
    let a: Vec<Vector> = (0..count).map(|_| uniform_vector(&mut rng, dim, 1.0)).collect();
    let b: Vec<f64> = a.iter().map(|ai| ai.dot(&planted)).collect();
    let lip_g = (a.iter().map(|ai| ai.norm_sq().powi(2)).sum::<f64>() / count as f64).sqrt();
    let constants = SmoothnessConstants { ell_f: 1.0, lip_g, ..Default::default() };
    BuiltinProblem {
        name: "truncated-sg".into(),
        problem: finite(
            SquaredResidualOracle { a, b },
            count,
            OuterFunction::TruncatedIdentity { floor: 0.0 },
            Regularizer::Zero,
            constants,
        ),
        x0: Vector::zeros(dim),
        stationary: Some(planted),
        radius: None,
    }
}

/// The synthetic suite with fixed seeds.
pub fn synthetic_oracles() -> Vec<BuiltinProblem> {
    vec![
        least_squares(30, 4, 6, 1),
        shifted_identity(25, 3, 2),
        scalar_quadratic(20, 3),
        truncated_sg(40, 5, 4),
        minimax(30, 4, 3, 5),
        quadratic_rows(30, 4, 3, 6),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::exact_gradient_mapping;
    use crate::model::{full_average_jacobian, full_average_map, objective_value};
    use crate::subproblem::SolverOptions;

    #[test]
    fn least_squares_solution_is_stationary() {
        let bp = least_squares(30, 4, 6, 1);
        let x = bp.stationary.unwrap();
        let g = full_average_map(&bp.problem, &x).unwrap();
        let j = full_average_jacobian(&bp.problem, &x).unwrap();
        assert!(j.tr_mul_vec(&g).norm() <= 1e-12);
    }

    #[test]
    fn shifted_identity_mapping_vanishes() {
        let bp = shifted_identity(25, 3, 2);
        let x = bp.stationary.clone().unwrap();
        let gm = exact_gradient_mapping(&bp.problem, &x, 1.0, &SolverOptions::default()).unwrap();
        assert!(gm.norm() <= 1e-6, "{}", gm.norm());
        let away = exact_gradient_mapping(&bp.problem, &bp.x0, 1.0, &SolverOptions::default()).unwrap();
        assert!(away.norm() > 1e-2);
    }

    #[test]
    fn scalar_quadratic_is_x_squared() {
        let bp = scalar_quadratic(20, 3);
        let x = Vector::new(vec![1.7]).unwrap();
        assert!((objective_value(&bp.problem, &x).unwrap() - 1.7 * 1.7).abs() <= 1e-12);
    }

    #[test]
    fn truncated_planted_point_is_optimal() {
        let bp = truncated_sg(40, 5, 4);
        assert!(objective_value(&bp.problem, bp.stationary.as_ref().unwrap()).unwrap() <= 1e-24);
    }
}
