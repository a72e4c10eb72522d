//! Problem description: component oracles, sampling regimes, outer functions,
//! regularizers and smoothness constants.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use thiserror::Error;

use crate::linalg::{LinalgError, Matrix, Vector};
use crate::prox;

/// Identifies one component mapping. Finite-sum tokens are `0..N`.
pub type Token = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("expectation regime has no finite ground-truth token set")]
    NoGroundTruth,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A family of smooth component mappings `g_t : R^n -> R^m`.
///
/// Implementations must be deterministic in `(token, x)`.
pub trait ComponentOracle: Send + Sync {
    /// `(n, m)`
    fn dims(&self) -> (usize, usize);
    fn eval_map(&self, token: Token, x: &Vector) -> Vector;
    fn eval_jac(&self, token: Token, x: &Vector) -> Matrix;
}

/// Draws tokens for the expectation regime.
pub trait TokenSampler: Send + Sync {
    fn sample(&self, rng: &mut dyn RngCore) -> Token;
    /// Size of a finite dataset `0..size` standing in for the distribution,
    /// used for offline ground-truth metrics.
    fn support_size(&self) -> Option<usize>;
}

/// Uniform draws from a finite dataset, treated as a distribution.
#[derive(Debug, Clone, Copy)]
pub struct UniformSampler {
    pub size: usize,
}

impl TokenSampler for UniformSampler {
    fn sample(&self, rng: &mut dyn RngCore) -> Token {
        use rand::Rng;
        rng.gen_range(0..self.size)
    }

    fn support_size(&self) -> Option<usize> {
        Some(self.size)
    }
}

/// Always returns the same token.
#[derive(Debug, Clone, Copy)]
pub struct FixedSampler(pub Token);

impl TokenSampler for FixedSampler {
    fn sample(&self, _rng: &mut dyn RngCore) -> Token {
        self.0
    }

    fn support_size(&self) -> Option<usize> {
        None
    }
}

#[derive(Clone)]
pub enum SamplingRegime {
    FiniteSum { n: usize },
    Expectation { sampler: Arc<dyn TokenSampler> },
}

impl SamplingRegime {
    /// Number of tokens in the ground-truth set, if any.
    pub fn ground_truth_size(&self) -> Option<usize> {
        match self {
            SamplingRegime::FiniteSum { n } => Some(*n),
            SamplingRegime::Expectation { sampler } => sampler.support_size(),
        }
    }

    pub fn finite_n(&self) -> Option<usize> {
        match self {
            SamplingRegime::FiniteSum { n } => Some(*n),
            SamplingRegime::Expectation { .. } => None,
        }
    }
}

impl fmt::Debug for SamplingRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingRegime::FiniteSum { n } => write!(f, "FiniteSum {{ n: {n} }}"),
            SamplingRegime::Expectation { sampler } => {
                write!(f, "Expectation {{ support: {:?} }}", sampler.support_size())
            }
        }
    }
}

/// Convex outer function `f : R^m -> R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuterFunction {
    L1Norm,
    /// `coeff * ||z||^2`
    SquaredNorm { coeff: f64 },
    MaxCoordinate,
    EuclideanNorm,
    /// `max(z, floor)`, scalar.
    TruncatedIdentity { floor: f64 },
    /// `z_1 + rho * max(0, z_2)`.
    AffinePlusHinge { rho: f64 },
}

impl OuterFunction {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidParameter(msg));
        match *self {
            OuterFunction::SquaredNorm { coeff } if !(coeff > 0.0 && coeff.is_finite()) => {
                bad(format!("squared-norm coefficient must be positive, got {coeff}"))
            }
            OuterFunction::TruncatedIdentity { floor } if !floor.is_finite() => {
                bad(format!("truncation floor must be finite, got {floor}"))
            }
            OuterFunction::AffinePlusHinge { rho } if !(rho >= 0.0 && rho.is_finite()) => {
                bad(format!("hinge weight must be nonnegative, got {rho}"))
            }
            _ => Ok(()),
        }
    }

    /// Required output dimension, for variants that fix it.
    pub fn required_m(&self) -> Option<usize> {
        match self {
            OuterFunction::TruncatedIdentity { .. } => Some(1),
            OuterFunction::AffinePlusHinge { .. } => Some(2),
            _ => None,
        }
    }

    pub fn value(&self, z: &Vector) -> f64 {
        match *self {
            OuterFunction::L1Norm => z.norm_l1(),
            OuterFunction::SquaredNorm { coeff } => coeff * z.norm_sq(),
            OuterFunction::MaxCoordinate => z.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            OuterFunction::EuclideanNorm => z.norm(),
            OuterFunction::TruncatedIdentity { floor } => z[0].max(floor),
            OuterFunction::AffinePlusHinge { rho } => z[0] + rho * z[1].max(0.0),
        }
    }

    /// Lipschitz constant w.r.t. the Euclidean norm on `R^m`; `None` for
    /// [`OuterFunction::SquaredNorm`].
    pub fn lipschitz(&self, m: usize) -> Option<f64> {
        match *self {
            OuterFunction::L1Norm => Some((m as f64).sqrt()),
            OuterFunction::SquaredNorm { .. } => None,
            OuterFunction::MaxCoordinate
            | OuterFunction::EuclideanNorm
            | OuterFunction::TruncatedIdentity { .. } => Some(1.0),
            OuterFunction::AffinePlusHinge { rho } => Some((1.0 + rho * rho).sqrt()),
        }
    }

    /// Gradient Lipschitz constant for smooth variants.
    pub fn gradient_lipschitz(&self) -> Option<f64> {
        match *self {
            OuterFunction::SquaredNorm { coeff } => Some(2.0 * coeff),
            _ => None,
        }
    }

    /// Euclidean projection onto `dom f*`.
    pub fn project_dual(&self, y: &Vector) -> Vector {
        match *self {
            OuterFunction::L1Norm => prox::project_linf_ball(y, 1.0),
            OuterFunction::SquaredNorm { .. } => y.clone(),
            OuterFunction::MaxCoordinate => prox::project_simplex(y),
            OuterFunction::EuclideanNorm => prox::project_l2_ball(y, 1.0),
            OuterFunction::TruncatedIdentity { .. } => {
                Vector::from_raw(vec![y[0].clamp(0.0, 1.0)])
            }
            OuterFunction::AffinePlusHinge { rho } => {
                Vector::from_raw(vec![1.0, y[1].clamp(0.0, rho)])
            }
        }
    }

    /// `f*(y)` for `y` in `dom f*`.
    pub fn conjugate_value(&self, y: &Vector) -> f64 {
        match *self {
            OuterFunction::SquaredNorm { coeff } => y.norm_sq() / (4.0 * coeff),
            OuterFunction::TruncatedIdentity { floor } => floor * y[0] - floor,
            _ => 0.0,
        }
    }

    /// `∇f*(y)` for `y` in `dom f*`.
    pub fn conjugate_gradient(&self, y: &Vector) -> Vector {
        match *self {
            OuterFunction::SquaredNorm { coeff } => y.scale(1.0 / (2.0 * coeff)),
            OuterFunction::TruncatedIdentity { floor } => Vector::from_raw(vec![floor]),
            _ => Vector::zeros(y.len()),
        }
    }

    /// Lipschitz constant of `∇f*`.
    pub fn conjugate_curvature(&self) -> f64 {
        match *self {
            OuterFunction::SquaredNorm { coeff } => 1.0 / (2.0 * coeff),
            _ => 0.0,
        }
    }
}

/// Convex regularizer `h : R^n -> R ∪ {+∞}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    Zero,
    L1 { lambda: f64 },
    /// Indicator of the unit simplex over the first `d` coordinates.
    SimplexIndicator { d: usize },
}

/// Slack used when testing simplex membership.
pub const SIMPLEX_TOL: f64 = 1e-9;

impl Regularizer {
    pub fn validate(&self, n: usize) -> Result<(), ModelError> {
        match *self {
            Regularizer::L1 { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => Err(
                ModelError::InvalidParameter(format!("l1 weight must be nonnegative, got {lambda}")),
            ),
            Regularizer::SimplexIndicator { d } if d == 0 || d > n => {
                Err(ModelError::Dimension { what: "simplex block", expected: n, got: d })
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda } => lambda * x.norm_l1(),
            Regularizer::SimplexIndicator { d } => {
                let block = &x.as_slice()[..d];
                let sum: f64 = block.iter().sum();
                if block.iter().all(|&v| v >= -SIMPLEX_TOL) && (sum - 1.0).abs() <= SIMPLEX_TOL {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `argmin_u { h(u) + ||u - v||^2 / (2t) }`
    pub fn prox(&self, v: &Vector, t: f64) -> Vector {
        match *self {
            Regularizer::Zero => v.clone(),
            Regularizer::L1 { lambda } => prox::prox_l1(v, t, lambda),
            Regularizer::SimplexIndicator { d } => {
                let head = Vector::from_raw(v.as_slice()[..d].to_vec());
                let mut out = prox::project_simplex(&head).into_vec();
                out.extend_from_slice(&v.as_slice()[d..]);
                Vector::from_raw(out)
            }
        }
    }
}

/// Problem constants. `lip_g` and `ell_g` are root-mean-square over components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SmoothnessConstants {
    pub ell_f: f64,
    pub lip_f: Option<f64>,
    pub ell_g: Option<f64>,
    pub lip_g: f64,
    pub sigma_g: Option<f64>,
    pub sigma_jac: Option<f64>,
}

impl SmoothnessConstants {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("ell_f", Some(self.ell_f)),
            ("lip_f", self.lip_f),
            ("ell_g", self.ell_g),
            ("lip_g", Some(self.lip_g)),
            ("sigma_g", self.sigma_g),
            ("sigma_jac", self.sigma_jac),
        ];
        for (name, v) in fields {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(ModelError::InvalidParameter(format!(
                        "{name} must be finite and nonnegative, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `ell_f * L_g + L_f * ell_g^2`, when `L_f` and `ell_g` are known.
    pub fn l_fog(&self) -> Option<f64> {
        let lf = self.lip_f?;
        let eg = self.ell_g?;
        Some(self.ell_f * self.lip_g + lf * eg * eg)
    }

    /// Default penalty: `4 L_fog` in the smooth case, else `4 ell_f L_g`.
    /// Falls back to 1 when the formula gives 0.
    pub fn safe_penalty(&self) -> f64 {
        let m = match self.l_fog() {
            Some(l) => 4.0 * l,
            None => 4.0 * self.ell_f * self.lip_g,
        };
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }
}

/// `Φ(x) = f(g(x)) + h(x)`.
#[derive(Clone)]
pub struct CompositeProblem {
    pub oracle: Arc<dyn ComponentOracle>,
    pub regime: SamplingRegime,
    pub outer: OuterFunction,
    pub reg: Regularizer,
    pub constants: SmoothnessConstants,
}

impl fmt::Debug for CompositeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("dims", &self.oracle.dims())
            .field("regime", &self.regime)
            .field("outer", &self.outer)
            .field("reg", &self.reg)
            .field("constants", &self.constants)
            .finish()
    }
}

impl CompositeProblem {
    pub fn new(
        oracle: Arc<dyn ComponentOracle>,
        regime: SamplingRegime,
        outer: OuterFunction,
        reg: Regularizer,
        constants: SmoothnessConstants,
    ) -> Result<Self, ModelError> {
        let (n, m) = oracle.dims();
        if n == 0 || m == 0 {
            return Err(ModelError::InvalidParameter(format!("empty oracle dims ({n}, {m})")));
        }
        if let SamplingRegime::FiniteSum { n: count } = regime {
            if count == 0 {
                return Err(ModelError::InvalidParameter("finite sum needs N >= 1".into()));
            }
        }
        outer.validate()?;
        if let Some(req) = outer.required_m() {
            if req != m {
                return Err(ModelError::Dimension { what: "outer function input", expected: req, got: m });
            }
        }
        reg.validate(n)?;
        constants.validate()?;
        Ok(CompositeProblem { oracle, regime, outer, reg, constants })
    }

    pub fn n(&self) -> usize {
        self.oracle.dims().0
    }

    pub fn m(&self) -> usize {
        self.oracle.dims().1
    }

    pub fn with_outer(mut self, outer: OuterFunction) -> Result<Self, ModelError> {
        self.outer = outer;
        CompositeProblem::new(self.oracle, self.regime, self.outer, self.reg, self.constants)
    }

    pub(crate) fn check_x(&self, x: &Vector) -> Result<(), ModelError> {
        if x.len() != self.n() {
            return Err(ModelError::Dimension { what: "point", expected: self.n(), got: x.len() });
        }
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite { index, value: x[index] }.into());
        }
        Ok(())
    }

    fn ground_truth(&self) -> Result<usize, ModelError> {
        self.regime.ground_truth_size().ok_or(ModelError::NoGroundTruth)
    }
}

/// Average of `g_t(x)` over `tokens`, summed in the given order.
pub fn average_map(problem: &CompositeProblem, tokens: &[Token], x: &Vector) -> Result<Vector, ModelError> {
    problem.check_x(x)?;
    if tokens.is_empty() {
        return Err(ModelError::InvalidParameter("empty token list".into()));
    }
    let mut acc = Vector::zeros(problem.m());
    for &t in tokens {
        acc.axpy(1.0, &problem.oracle.eval_map(t, x));
    }
    acc.scale_mut(1.0 / tokens.len() as f64);
    Ok(acc)
}

/// Average of `g'_t(x)` over `tokens`, summed in the given order.
pub fn average_jacobian(
    problem: &CompositeProblem,
    tokens: &[Token],
    x: &Vector,
) -> Result<Matrix, ModelError> {
    problem.check_x(x)?;
    if tokens.is_empty() {
        return Err(ModelError::InvalidParameter("empty token list".into()));
    }
    let mut acc = Matrix::zeros(problem.m(), problem.n());
    for &t in tokens {
        acc.axpy(1.0, &problem.oracle.eval_jac(t, x));
    }
    acc.scale_mut(1.0 / tokens.len() as f64);
    Ok(acc)
}

/// `(1/N) Σ g_i(x)` over the ground-truth token set, ascending.
pub fn full_average_map(problem: &CompositeProblem, x: &Vector) -> Result<Vector, ModelError> {
    let n = problem.ground_truth()?;
    let tokens: Vec<Token> = (0..n).collect();
    average_map(problem, &tokens, x)
}

/// `(1/N) Σ g'_i(x)` over the ground-truth token set, ascending.
pub fn full_average_jacobian(problem: &CompositeProblem, x: &Vector) -> Result<Matrix, ModelError> {
    let n = problem.ground_truth()?;
    let tokens: Vec<Token> = (0..n).collect();
    average_jacobian(problem, &tokens, x)
}

/// `f(g(x)) + h(x)`; `+∞` outside `dom h`.
pub fn objective_value(problem: &CompositeProblem, x: &Vector) -> Result<f64, ModelError> {
    problem.check_x(x)?;
    let hx = problem.reg.value(x);
    if hx.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let g = full_average_map(problem, x)?;
    Ok(problem.outer.value(&g) + hx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Scaled;

    impl ComponentOracle for Scaled {
        fn dims(&self) -> (usize, usize) {
            (1, 1)
        }
        fn eval_map(&self, t: Token, x: &Vector) -> Vector {
            Vector::from_raw(vec![(t + 1) as f64 * x[0]])
        }
        fn eval_jac(&self, t: Token, _x: &Vector) -> Matrix {
            Matrix::from_raw(1, 1, vec![(t + 1) as f64])
        }
    }

    struct ScaledSquare;

    impl ComponentOracle for ScaledSquare {
        fn dims(&self) -> (usize, usize) {
            (1, 1)
        }
        fn eval_map(&self, t: Token, x: &Vector) -> Vector {
            Vector::from_raw(vec![(t + 1) as f64 * x[0] * x[0]])
        }
        fn eval_jac(&self, t: Token, x: &Vector) -> Matrix {
            Matrix::from_raw(1, 1, vec![2.0 * (t + 1) as f64 * x[0]])
        }
    }

    struct Linear(Matrix);

    impl ComponentOracle for Linear {
        fn dims(&self) -> (usize, usize) {
            (self.0.cols(), self.0.rows())
        }
        fn eval_map(&self, _t: Token, x: &Vector) -> Vector {
            self.0.mul_vec(x)
        }
        fn eval_jac(&self, _t: Token, _x: &Vector) -> Matrix {
            self.0.clone()
        }
    }

    fn problem(
        oracle: impl ComponentOracle + 'static,
        n: usize,
        outer: OuterFunction,
        reg: Regularizer,
    ) -> CompositeProblem {
        CompositeProblem::new(
            Arc::new(oracle),
            SamplingRegime::FiniteSum { n },
            outer,
            reg,
            SmoothnessConstants::default(),
        )
        .unwrap()
    }

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn average_of_identity() {
        let p = problem(Linear(Matrix::identity(2)), 1, OuterFunction::L1Norm, Regularizer::Zero);
        assert_eq!(full_average_map(&p, &v(&[1.0, 2.0])).unwrap(), v(&[1.0, 2.0]));
        assert_eq!(full_average_jacobian(&p, &v(&[1.0, 2.0])).unwrap(), Matrix::identity(2));
    }

    #[test]
    fn average_hand_sum() {
        let p = problem(Scaled, 3, OuterFunction::L1Norm, Regularizer::Zero);
        assert_eq!(full_average_map(&p, &v(&[1.0])).unwrap(), v(&[2.0]));
        let q = problem(ScaledSquare, 2, OuterFunction::L1Norm, Regularizer::Zero);
        assert_eq!(full_average_jacobian(&q, &v(&[1.0])).unwrap().get(0, 0), 3.0);
    }

    #[test]
    fn objective_examples() {
        let zero = problem(Linear(Matrix::zeros(2, 2)), 1, OuterFunction::L1Norm, Regularizer::Zero);
        assert_eq!(objective_value(&zero, &v(&[3.0, -1.0])).unwrap(), 0.0);

        let sq = problem(
            Linear(Matrix::identity(1)),
            1,
            OuterFunction::SquaredNorm { coeff: 1.0 },
            Regularizer::L1 { lambda: 1.0 },
        );
        assert_eq!(objective_value(&sq, &v(&[2.0])).unwrap(), 6.0);

        let simplex = problem(
            Linear(Matrix::identity(2)),
            1,
            OuterFunction::L1Norm,
            Regularizer::SimplexIndicator { d: 2 },
        );
        assert_eq!(objective_value(&simplex, &v(&[0.7, 0.7])).unwrap(), f64::INFINITY);
        assert!(objective_value(&simplex, &v(&[0.3, 0.7])).unwrap().is_finite());
    }

    #[test]
    fn dimension_errors() {
        let p = problem(Linear(Matrix::identity(2)), 1, OuterFunction::L1Norm, Regularizer::Zero);
        assert!(matches!(full_average_map(&p, &v(&[1.0])), Err(ModelError::Dimension { .. })));
        let bad = CompositeProblem::new(
            Arc::new(Linear(Matrix::identity(3))),
            SamplingRegime::FiniteSum { n: 1 },
            OuterFunction::AffinePlusHinge { rho: 1.0 },
            Regularizer::Zero,
            SmoothnessConstants::default(),
        );
        assert!(matches!(bad, Err(ModelError::Dimension { .. })));
    }

    #[test]
    fn expectation_without_support_has_no_full_average() {
        let p = CompositeProblem::new(
            Arc::new(Scaled),
            SamplingRegime::Expectation { sampler: Arc::new(FixedSampler(0)) },
            OuterFunction::L1Norm,
            Regularizer::Zero,
            SmoothnessConstants::default(),
        )
        .unwrap();
        assert_eq!(full_average_map(&p, &v(&[1.0])), Err(ModelError::NoGroundTruth));
        assert_eq!(average_map(&p, &[0, 2], &v(&[1.0])).unwrap(), v(&[2.0]));
    }

    #[test]
    fn composite_constant() {
        let c = SmoothnessConstants {
            ell_f: 2.0,
            lip_f: Some(3.0),
            ell_g: Some(0.5),
            lip_g: 1.5,
            ..Default::default()
        };
        assert_relative_eq!(c.l_fog().unwrap(), 2.0 * 1.5 + 3.0 * 0.25);
        assert_relative_eq!(c.safe_penalty(), 4.0 * 3.75);
        let linear = SmoothnessConstants { ell_f: 1.0, lip_g: 0.0, ..Default::default() };
        assert_eq!(linear.safe_penalty(), 1.0);
    }

    #[test]
    fn conjugate_domains() {
        let y = v(&[2.0, -3.0]);
        assert_eq!(OuterFunction::L1Norm.project_dual(&y), v(&[1.0, -1.0]));
        assert_eq!(OuterFunction::AffinePlusHinge { rho: 0.5 }.project_dual(&y), v(&[1.0, 0.0]));
        assert_relative_eq!(OuterFunction::EuclideanNorm.project_dual(&y).norm(), 1.0);
        let s = OuterFunction::MaxCoordinate.project_dual(&y);
        assert_eq!(s, v(&[1.0, 0.0]));
    }
}
