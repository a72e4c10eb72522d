//! Finite-difference and empirical Lipschitz checks for oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{Matrix, Vector};
use crate::model::{CompositeProblem, ModelError};
use crate::subproblem::spectral_norm;

use super::BuiltinProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vector {
    Vector::from_raw((0..n).map(|_| rng.gen_range(-radius..=radius)).collect())
}

/// Tokens probed per point: all of them for finite sums up to `cap`,
/// otherwise `cap` evenly spaced ones.
fn probe_tokens(problem: &CompositeProblem, cap: usize) -> Vec<usize> {
    let n = problem.regime.ground_truth_size().unwrap_or(cap);
    if n <= cap {
        (0..n).collect()
    } else {
        (0..cap).map(|i| i * n / cap).collect()
    }
}

/// Largest relative central-difference error of any component Jacobian at
/// `points` random points.
pub fn jacobian_fd_error(problem: &CompositeProblem, points: usize, radius: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, m) = (problem.n(), problem.m());
    let tokens = probe_tokens(problem, 16);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x = random_point(&mut rng, n, radius);
        let h = 1e-5 * (1.0 + x.norm());
        for &t in &tokens {
            let jac = problem.oracle.eval_jac(t, &x);
            let mut fd = Matrix::zeros(m, n);
            for c in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp.as_mut_slice()[c] += h;
                xm.as_mut_slice()[c] -= h;
                let d = problem.oracle.eval_map(t, &xp).sub(&problem.oracle.eval_map(t, &xm));
                for r in 0..m {
                    fd.set(r, c, d[r] / (2.0 * h));
                }
            }
            let err = jac.sub(&fd).frobenius_norm() / jac.frobenius_norm().max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}

/// Largest observed ratios `(ℓ_g, L_g, ℓ_f)` over random pairs in the box.
///
/// The mapping ratios are root-mean-square over components, matching the
/// convention for the documented constants. The `f` ratio is measured on
/// pairs of average-mapping values.
pub fn empirical_lipschitz(
    problem: &CompositeProblem,
    pairs: usize,
    radius: f64,
    seed: u64,
) -> Result<(f64, f64, f64), ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = problem.n();
    let tokens = probe_tokens(problem, 64);
    let inv = 1.0 / tokens.len() as f64;
    let (mut lg, mut jg, mut lf) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..pairs {
        let x = random_point(&mut rng, n, radius);
        // Mix far pairs with close ones, where curvature bounds are tight.
        let y = if rng.gen_bool(0.5) {
            random_point(&mut rng, n, radius)
        } else {
            let step = random_point(&mut rng, n, 1.0).scale(10f64.powf(rng.gen_range(-4.0..0.0)));
            let y = x.add_scaled(1.0, &step);
            Vector::from_raw(y.iter().map(|v| v.clamp(-radius, radius)).collect())
        };
        let dist = x.dist(&y);
        if dist == 0.0 {
            continue;
        }
        let (mut sg, mut sj) = (0.0, 0.0);
        let mut gx = Vector::zeros(problem.m());
        let mut gy = Vector::zeros(problem.m());
        for &t in &tokens {
            let (a, b) = (problem.oracle.eval_map(t, &x), problem.oracle.eval_map(t, &y));
            sg += a.sub(&b).norm_sq();
            gx.axpy(inv, &a);
            gy.axpy(inv, &b);
            let dj = problem.oracle.eval_jac(t, &x).sub(&problem.oracle.eval_jac(t, &y));
            sj += spectral_norm(&dj).powi(2);
        }
        lg = lg.max((sg * inv).sqrt() / dist);
        jg = jg.max((sj * inv).sqrt() / dist);
        let dz = gx.dist(&gy);
        if dz > 0.0 {
            lf = lf.max((problem.outer.value(&gx) - problem.outer.value(&gy)).abs() / dz);
        }
    }
    Ok((lg, jg, lf))
}

/// Finite-difference and Lipschitz checks against the documented constants.
pub fn check_builtin(bp: &BuiltinProblem, seed: u64) -> Result<Vec<CheckOutcome>, ModelError> {
    let radius = bp.radius.unwrap_or(2.0);
    let c = &bp.problem.constants;
    let fd = jacobian_fd_error(&bp.problem, 20, radius, seed);
    let (lg, jg, lf) = empirical_lipschitz(&bp.problem, 2000, radius, seed ^ 0x5eed)?;
    let slack = 1.0 + 1e-6;
    let mut out = vec![
        CheckOutcome {
            name: format!("{}: jacobian", bp.name),
            passed: fd <= 1e-5,
            detail: format!("max relative fd error {fd:.3e}"),
        },
        CheckOutcome {
            name: format!("{}: L_g", bp.name),
            passed: jg <= c.lip_g * slack,
            detail: format!("observed {jg:.4e} <= documented {:.4e}", c.lip_g),
        },
        CheckOutcome {
            name: format!("{}: ell_f", bp.name),
            passed: lf <= c.ell_f * slack,
            detail: format!("observed {lf:.4e} <= documented {:.4e}", c.ell_f),
        },
    ];
    if let Some(ell_g) = c.ell_g {
        out.push(CheckOutcome {
            name: format!("{}: ell_g", bp.name),
            passed: lg <= ell_g * slack,
            detail: format!("observed {lg:.4e} <= documented {ell_g:.4e}"),
        });
    }
    Ok(out)
}
