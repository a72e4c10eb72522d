//! Per-iteration estimates `(g̃, J̃)` of the average mapping and Jacobian.
//!
//! Finite-sum batches are drawn uniformly with replacement, except that a
//! batch of size exactly `N` is the full index set in ascending order. One
//! RNG stream is consumed per update, g-batch first, then J-batch.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use thiserror::Error;

use crate::linalg::{Matrix, Vector};
use crate::model::{average_jacobian, average_map, CompositeProblem, ModelError, SamplingRegime, Token};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("batch of size {size} exceeds the {n} available components")]
    BatchTooLarge { size: usize, n: usize },
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("inner update requested before the epoch anchor was computed")]
    NotAnchored,
    #[error("{0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    FullBatch,
    MiniBatch,
    SvrgCorrected,
    Sarah,
}

/// Batch sizes for the mapping and Jacobian estimates. With `shared`, the
/// Jacobian batch is a prefix of the mapping batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSpec {
    pub size_g: usize,
    pub size_j: usize,
    pub shared: bool,
}

impl BatchSpec {
    pub fn new(size_g: usize, size_j: usize, shared: bool) -> Result<Self, EstimatorError> {
        let spec = BatchSpec { size_g, size_j, shared };
        spec.validate()?;
        Ok(spec)
    }

    pub fn full(n: usize) -> Self {
        BatchSpec { size_g: n, size_j: n, shared: false }
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        if self.size_g == 0 || self.size_j == 0 {
            return Err(EstimatorError::InvalidBatch("batch sizes must be at least 1".into()));
        }
        if self.shared && self.size_j > self.size_g {
            return Err(EstimatorError::InvalidBatch(format!(
                "shared batch needs size_j <= size_g, got {} > {}",
                self.size_j, self.size_g
            )));
        }
        Ok(())
    }
}

/// One estimate together with its cost.
///
/// `calls_*` count sampled components, which is what the schedules budget;
/// `raw_evals_*` count actual oracle invocations.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOut {
    pub g_tilde: Vector,
    pub j_tilde: Matrix,
    pub calls_g: u64,
    pub calls_j: u64,
    pub raw_evals_g: u64,
    pub raw_evals_j: u64,
}

#[derive(Debug, Clone)]
struct Anchor {
    x: Vector,
    g: Vector,
    j: Matrix,
}

#[derive(Debug, Clone)]
pub struct EstimatorState {
    scheme: Scheme,
    anchor: Option<Anchor>,
    running: Option<Anchor>,
    rng: ChaCha8Rng,
}

enum Batch {
    Full(usize),
    Sampled(Vec<Token>),
}

impl Batch {
    fn tokens(&self) -> Vec<Token> {
        match self {
            Batch::Full(n) => (0..*n).collect(),
            Batch::Sampled(t) => t.clone(),
        }
    }
}

impl EstimatorState {
    pub fn new(scheme: Scheme, rng: ChaCha8Rng) -> Self {
        EstimatorState { scheme, anchor: None, running: None, rng }
    }

    pub fn from_seed(scheme: Scheme, seed: u64) -> Self {
        Self::new(scheme, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn anchor_x(&self) -> Option<&Vector> {
        self.anchor.as_ref().map(|a| &a.x)
    }

    pub fn prev_x(&self) -> Option<&Vector> {
        self.running.as_ref().map(|r| &r.x)
    }

    fn draw(&mut self, problem: &CompositeProblem, size: usize) -> Result<Batch, EstimatorError> {
        match &problem.regime {
            SamplingRegime::FiniteSum { n } => {
                let n = *n;
                if size > n {
                    Err(EstimatorError::BatchTooLarge { size, n })
                } else if size == n {
                    Ok(Batch::Full(n))
                } else {
                    Ok(Batch::Sampled((0..size).map(|_| self.rng.gen_range(0..n)).collect()))
                }
            }
            SamplingRegime::Expectation { sampler } => {
                let rng: &mut dyn rand::RngCore = &mut self.rng;
                Ok(Batch::Sampled((0..size).map(|_| sampler.sample(rng)).collect()))
            }
        }
    }

    fn draw_pair(
        &mut self,
        problem: &CompositeProblem,
        spec: &BatchSpec,
    ) -> Result<(Vec<Token>, Vec<Token>, bool), EstimatorError> {
        spec.validate()?;
        let g = self.draw(problem, spec.size_g)?;
        let (j, prefix) = match (&g, spec.shared) {
            (Batch::Sampled(tokens), true) => (tokens[..spec.size_j].to_vec(), true),
            _ => (self.draw(problem, spec.size_j)?.tokens(), false),
        };
        Ok((g.tokens(), j, prefix))
    }

    fn exact(problem: &CompositeProblem, x: &Vector) -> Result<EstimateOut, EstimatorError> {
        let n = problem.regime.ground_truth_size().ok_or(ModelError::NoGroundTruth)?;
        let tokens: Vec<Token> = (0..n).collect();
        let g = average_map(problem, &tokens, x)?;
        let j = average_jacobian(problem, &tokens, x)?;
        let n = n as u64;
        Ok(EstimateOut { g_tilde: g, j_tilde: j, calls_g: n, calls_j: n, raw_evals_g: n, raw_evals_j: n })
    }

    fn sampled(
        &mut self,
        problem: &CompositeProblem,
        x: &Vector,
        spec: &BatchSpec,
    ) -> Result<EstimateOut, EstimatorError> {
        let (bg, bj, _) = self.draw_pair(problem, spec)?;
        let g = average_map(problem, &bg, x)?;
        let j = average_jacobian(problem, &bj, x)?;
        Ok(EstimateOut {
            g_tilde: g,
            j_tilde: j,
            calls_g: bg.len() as u64,
            calls_j: bj.len() as u64,
            raw_evals_g: bg.len() as u64,
            raw_evals_j: bj.len() as u64,
        })
    }

    /// Epoch-start estimate at `x0`.
    pub fn anchor_reset(
        &mut self,
        problem: &CompositeProblem,
        x0: &Vector,
        batch0: &BatchSpec,
    ) -> Result<EstimateOut, EstimatorError> {
        problem.check_x(x0)?;
        batch0.validate()?;
        if let Some(n) = problem.regime.finite_n() {
            let size = batch0.size_g.max(batch0.size_j);
            if size > n {
                return Err(EstimatorError::BatchTooLarge { size, n });
            }
        }
        match self.scheme {
            Scheme::FullBatch => Self::exact(problem, x0),
            Scheme::MiniBatch => self.sampled(problem, x0, batch0),
            Scheme::SvrgCorrected => {
                let n = problem.regime.finite_n().ok_or_else(|| {
                    EstimatorError::Unsupported("corrected SVRG estimator needs a finite sum".into())
                })?;
                if batch0.size_g != n || batch0.size_j != n {
                    return Err(EstimatorError::InvalidBatch(format!(
                        "corrected SVRG anchor must use the full batch of {n}"
                    )));
                }
                let out = Self::exact(problem, x0)?;
                self.anchor = Some(Anchor { x: x0.clone(), g: out.g_tilde.clone(), j: out.j_tilde.clone() });
                Ok(out)
            }
            Scheme::Sarah => {
                let out = self.sampled(problem, x0, batch0)?;
                self.running = Some(Anchor { x: x0.clone(), g: out.g_tilde.clone(), j: out.j_tilde.clone() });
                Ok(out)
            }
        }
    }

    /// Estimate at an inner iterate.
    pub fn inner_update(
        &mut self,
        problem: &CompositeProblem,
        x: &Vector,
        batch: &BatchSpec,
    ) -> Result<EstimateOut, EstimatorError> {
        problem.check_x(x)?;
        match self.scheme {
            Scheme::FullBatch => Self::exact(problem, x),
            Scheme::MiniBatch => self.sampled(problem, x, batch),
            Scheme::SvrgCorrected => self.svrg_update(problem, x, batch),
            Scheme::Sarah => self.sarah_update(problem, x, batch),
        }
    }

    fn svrg_update(
        &mut self,
        problem: &CompositeProblem,
        x: &Vector,
        batch: &BatchSpec,
    ) -> Result<EstimateOut, EstimatorError> {
        if self.anchor.is_none() {
            return Err(EstimatorError::NotAnchored);
        }
        let (bg, bj, prefix) = self.draw_pair(problem, batch)?;
        let anchor = self.anchor.as_ref().expect("checked above");
        let oracle = &problem.oracle;
        let d = x.sub(&anchor.x);

        let mut raw_j = 0u64;
        let mut corr = Vector::zeros(problem.m());
        let mut anchor_jacs = Vec::with_capacity(if prefix { bj.len() } else { 0 });
        for (pos, &t) in bg.iter().enumerate() {
            let ja = oracle.eval_jac(t, &anchor.x);
            raw_j += 1;
            let e = oracle.eval_map(t, x).sub(&oracle.eval_map(t, &anchor.x)).add_scaled(-1.0, &ja.mul_vec(&d));
            corr.axpy(1.0, &e);
            if prefix && pos < bj.len() {
                anchor_jacs.push(ja);
            }
        }
        corr.scale_mut(1.0 / bg.len() as f64);
        let mut g = anchor.g.clone();
        g.axpy(1.0, &anchor.j.mul_vec(&d).add_scaled(1.0, &corr));

        let mut jcorr = Matrix::zeros(problem.m(), problem.n());
        for (pos, &t) in bj.iter().enumerate() {
            let ja = if prefix && pos < anchor_jacs.len() {
                anchor_jacs[pos].clone()
            } else {
                raw_j += 1;
                oracle.eval_jac(t, &anchor.x)
            };
            jcorr.axpy(1.0, &oracle.eval_jac(t, x).sub(&ja));
            raw_j += 1;
        }
        jcorr.scale_mut(1.0 / bj.len() as f64);
        let j = anchor.j.add_scaled(1.0, &jcorr);

        Ok(EstimateOut {
            g_tilde: g,
            j_tilde: j,
            calls_g: bg.len() as u64,
            calls_j: bj.len() as u64,
            raw_evals_g: 2 * bg.len() as u64,
            raw_evals_j: raw_j,
        })
    }

    fn sarah_update(
        &mut self,
        problem: &CompositeProblem,
        x: &Vector,
        batch: &BatchSpec,
    ) -> Result<EstimateOut, EstimatorError> {
        if self.running.is_none() {
            return Err(EstimatorError::NotAnchored);
        }
        let (bg, bj, _) = self.draw_pair(problem, batch)?;
        let running = self.running.as_mut().expect("checked above");
        let oracle = &problem.oracle;

        let mut dg = Vector::zeros(problem.m());
        for &t in &bg {
            dg.axpy(1.0, &oracle.eval_map(t, x).sub(&oracle.eval_map(t, &running.x)));
        }
        dg.scale_mut(1.0 / bg.len() as f64);
        let mut dj = Matrix::zeros(problem.m(), problem.n());
        for &t in &bj {
            dj.axpy(1.0, &oracle.eval_jac(t, x).sub(&oracle.eval_jac(t, &running.x)));
        }
        dj.scale_mut(1.0 / bj.len() as f64);

        running.g.axpy(1.0, &dg);
        running.j.axpy(1.0, &dj);
        running.x = x.clone();
        Ok(EstimateOut {
            g_tilde: running.g.clone(),
            j_tilde: running.j.clone(),
            calls_g: bg.len() as u64,
            calls_j: bj.len() as u64,
            raw_evals_g: 2 * bg.len() as u64,
            raw_evals_j: 2 * bj.len() as u64,
        })
    }
}
