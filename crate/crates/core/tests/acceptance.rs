//! Acceptance checks. Each test prints one `criterion N: PASS|FAIL` line.

use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vrpl_core::driver::{
    run_deterministic_pl, run_minibatch_pl, run_svr_pl, schedule_sarah_expect_nonsmooth, schedule_sarah_finite_smooth,
    schedule_svrg_finite, Checkpoint, Horizon, NoObserver, RunResult, Schedule,
};
use vrpl_core::estimators::{BatchSpec, EstimatorState, Scheme};
use vrpl_core::metrics::{emit_trace, exact_gradient_mapping, MetricsError, MetricsObserver, TraceRecord};
use vrpl_core::model::{full_average_jacobian, full_average_map, objective_value};
use vrpl_core::problems::{builtin_problems, multiloss_oracle, synthetic, synthetic_multiloss_instance};
use vrpl_core::subproblem::{solve, solve_dual, solve_gauss_newton, solve_truncated, ProxLinearModel, SolverOptions};
use vrpl_core::{
    ComponentOracle, CompositeProblem, Matrix, OuterFunction, Regularizer, SamplingRegime, SmoothnessConstants,
    Vector,
};

fn report(n: usize, pass: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n}: {detail}");
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vector {
    Vector::new((0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn uniform_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::new(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn random_outer(rng: &mut ChaCha8Rng, which: usize) -> OuterFunction {
    match which {
        0 => OuterFunction::L1Norm,
        1 => OuterFunction::SquaredNorm { coeff: rng.gen_range(0.2..2.0) },
        2 => OuterFunction::MaxCoordinate,
        3 => OuterFunction::EuclideanNorm,
        4 => OuterFunction::TruncatedIdentity { floor: rng.gen_range(-1.0..1.0) },
        _ => OuterFunction::AffinePlusHinge { rho: rng.gen_range(0.0..2.0) },
    }
}

fn random_model(rng: &mut ChaCha8Rng, which_outer: usize, which_reg: usize) -> ProxLinearModel {
    let n = rng.gen_range(1..=3);
    let outer = random_outer(rng, which_outer);
    let m = outer.required_m().unwrap_or_else(|| rng.gen_range(1..=3));
    let reg = match which_reg {
        0 => Regularizer::Zero,
        1 => Regularizer::L1 { lambda: rng.gen_range(0.1..1.0) },
        _ => Regularizer::SimplexIndicator { d: rng.gen_range(1..=n) },
    };
    ProxLinearModel {
        x_bar: uniform_vec(rng, n, -1.0, 1.0),
        g_tilde: uniform_vec(rng, m, -1.0, 1.0),
        j_tilde: uniform_mat(rng, m, n),
        penalty: rng.gen_range(0.5..4.0),
        outer,
        reg,
    }
}

/// Golden-section search of a convex function on `[lo, hi]`.
fn golden(lo: f64, hi: f64, f: &mut dyn FnMut(f64) -> f64) -> (f64, f64) {
    const R: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - R * (b - a);
    let mut d = a + R * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-10 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - R * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + R * (b - a);
            fd = f(d);
        }
    }
    let mut best = (lo, f(lo));
    for t in [0.5 * (a + b), hi] {
        let v = f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    best
}

/// Exhaustive search oracle: nested golden-section search over each free
/// coordinate, with one simplex coordinate eliminated by the sum
/// constraint. Minimizing out trailing coordinates keeps every level convex.
fn search_oracle(model: &ProxLinearModel) -> (Vector, f64) {
    let n = model.n();
    let d = match model.reg {
        Regularizer::SimplexIndicator { d } => d,
        _ => 0,
    };
    let simplex_free = d.saturating_sub(1);
    let free: Vec<usize> = (0..simplex_free).chain(d..n).collect();

    fn level(
        model: &ProxLinearModel,
        free: &[usize],
        d: usize,
        simplex_free: usize,
        p: &mut Vec<f64>,
    ) -> f64 {
        let slot = p.len();
        if slot == free.len() {
            let mut x = vec![0.0; model.n()];
            for (s, &i) in free.iter().enumerate() {
                x[i] = p[s];
            }
            if d > 0 {
                x[d - 1] = 1.0 - p[..simplex_free].iter().sum::<f64>();
            }
            return model.value(&Vector::new(x).unwrap());
        }
        let i = free[slot];
        let (lo, hi) = if i < d {
            (0.0, (1.0 - p[..slot].iter().sum::<f64>()).max(0.0))
        } else {
            (model.x_bar[i] - 10.0, model.x_bar[i] + 10.0)
        };
        let mut f = |t: f64| {
            p.push(t);
            let v = level(model, free, d, simplex_free, p);
            p.pop();
            v
        };
        golden(lo, hi, &mut f).1
    }

    // Fix coordinates one at a time at their partial minimizers.
    let mut p = Vec::new();
    for slot in 0..free.len() {
        let i = free[slot];
        let (lo, hi) = if i < d {
            (0.0, (1.0 - p[..slot].iter().sum::<f64>()).max(0.0))
        } else {
            (model.x_bar[i] - 10.0, model.x_bar[i] + 10.0)
        };
        let mut f = |t: f64| {
            p.push(t);
            let v = level(model, &free, d, simplex_free, &mut p);
            p.pop();
            v
        };
        let (t, _) = golden(lo, hi, &mut f);
        p.push(t);
    }
    let mut x = vec![0.0; n];
    for (s, &i) in free.iter().enumerate() {
        x[i] = p[s];
    }
    if d > 0 {
        x[d - 1] = 1.0 - p[..simplex_free].iter().sum::<f64>();
    }
    let x = Vector::new(x).unwrap();
    let v = model.value(&x);
    (x, v)
}

#[test]
fn criterion_01_subproblem_matches_search_oracle() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let opts = SolverOptions { tol: 1e-12, max_iters: 1_000_000 };
    let (mut worst_val, mut worst_arg) = (0.0f64, 0.0f64);
    for i in 0..200 {
        let model = random_model(&mut rng, i % 6, (i / 6) % 3);
        let sol = solve(&model, &opts).unwrap();
        let (gx, gv) = search_oracle(&model);
        worst_val = worst_val.max((model.value(&sol.x_plus) - gv).abs());
        worst_arg = worst_arg.max(sol.x_plus.dist(&gx));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        worst_val <= 1e-5 && worst_arg <= 1e-3 && secs < 60.0,
        format!("max value gap {worst_val:.2e}, max argmin gap {worst_arg:.2e}, {secs:.1}s"),
    );
}

#[test]
fn criterion_02_closed_forms_match_dual() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let opts = SolverOptions { tol: 1e-14, max_iters: 5_000_000 };
    let mut worst_gn = 0.0f64;
    for _ in 0..100 {
        let (n, m) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let model = ProxLinearModel {
            x_bar: uniform_vec(&mut rng, n, -1.0, 1.0),
            g_tilde: uniform_vec(&mut rng, m, -1.0, 1.0),
            j_tilde: uniform_mat(&mut rng, m, n),
            penalty: rng.gen_range(0.5..4.0),
            outer: OuterFunction::SquaredNorm { coeff: rng.gen_range(0.2..2.0) },
            reg: Regularizer::Zero,
        };
        let a = solve_gauss_newton(&model).unwrap();
        let b = solve_dual(&model, &opts).unwrap();
        worst_gn = worst_gn.max(a.x_plus.dist(&b.x_plus));
    }
    let mut worst_tr = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=5);
        let model = ProxLinearModel {
            x_bar: uniform_vec(&mut rng, n, -1.0, 1.0),
            g_tilde: uniform_vec(&mut rng, 1, -1.0, 1.0),
            j_tilde: uniform_mat(&mut rng, 1, n),
            penalty: rng.gen_range(0.5..4.0),
            outer: OuterFunction::TruncatedIdentity { floor: rng.gen_range(-1.0..1.0) },
            reg: Regularizer::Zero,
        };
        let a = solve_truncated(&model).unwrap();
        let b = solve_dual(&model, &opts).unwrap();
        worst_tr = worst_tr.max(a.x_plus.dist(&b.x_plus));
    }
    report(
        2,
        worst_gn <= 1e-6 && worst_tr <= 1e-6,
        format!("gauss-newton gap {worst_gn:.2e}, truncated gap {worst_tr:.2e}"),
    );
}

/// Random point in `dom h` inside the box of half-width `radius`.
fn domain_point(rng: &mut ChaCha8Rng, reg: Regularizer, n: usize, radius: f64) -> Vector {
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-radius..=radius)).collect();
    if let Regularizer::SimplexIndicator { d } = reg {
        let e: Vec<f64> = (0..d).map(|_| -rng.gen_range(f64::EPSILON..1.0f64).ln()).collect();
        let s: f64 = e.iter().sum();
        for i in 0..d {
            x[i] = e[i] / s;
        }
    }
    Vector::new(x).unwrap()
}

#[test]
fn criterion_03_majorization() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = Vec::new();
    let mut checked = 0;
    for bp in builtin_problems() {
        let p = &bp.problem;
        let c = &p.constants;
        let radius = bp.radius.map_or(2.0, |r| r.min(2.0));
        for _ in 0..1000 {
            let x = domain_point(&mut rng, p.reg, p.n(), radius);
            let y = domain_point(&mut rng, p.reg, p.n(), radius);
            let lhs = p.outer.value(&full_average_map(p, &x).unwrap());
            let lin = full_average_map(p, &y).unwrap().add_scaled(1.0, &full_average_jacobian(p, &y).unwrap().mul_vec(&x.sub(&y)));
            let rhs = p.outer.value(&lin) + 0.5 * c.ell_f * c.lip_g * x.dist(&y).powi(2);
            checked += 1;
            if lhs > rhs + 1e-12 {
                violations.push(format!("{} ({:.2e})", bp.name, lhs - rhs));
            }
        }
    }
    report(3, violations.is_empty(), format!("{checked} pairs, {} violations {:?}", violations.len(), violations));
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn criterion_04_svrg_error_bounds() {
    let start = std::time::Instant::now();
    let bp = synthetic::quadratic_rows(200, 5, 3, 11);
    let p = &bp.problem;
    let lip = p.constants.lip_g;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x0 = uniform_vec(&mut rng, 5, -1.0, 1.0);
    let x = x0.add_scaled(1.0, &uniform_vec(&mut rng, 5, -0.8, 0.8));
    let dist_sq = x.dist(&x0).powi(2);
    let g_true = full_average_map(p, &x).unwrap();
    let j_true = full_average_jacobian(p, &x).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for &size in &[1usize, 4, 16] {
        let mut state = EstimatorState::from_seed(Scheme::SvrgCorrected, size as u64);
        state.anchor_reset(p, &x0, &BatchSpec::full(200)).unwrap();
        let spec = BatchSpec::new(size, size, false).unwrap();
        let (mut eg, mut ej) = (Vec::with_capacity(10_000), Vec::with_capacity(10_000));
        for _ in 0..10_000 {
            let out = state.inner_update(p, &x, &spec).unwrap();
            eg.push(out.g_tilde.dist(&g_true));
            ej.push(out.j_tilde.sub(&j_true).frobenius_norm().powi(2));
        }
        let (mg, sg) = mean_se(&eg);
        let (mj, sj) = mean_se(&ej);
        let bg = lip / (2.0 * (size as f64).sqrt()) * dist_sq;
        let bj = lip * lip / size as f64 * dist_sq;
        pass &= mg <= bg + 4.0 * sg && mj <= bj + 4.0 * sj;
        lines.push(format!("B=S={size}: g {mg:.3e} vs bound {bg:.3e} (se {sg:.1e}), J {mj:.3e} vs bound {bj:.3e} (se {sj:.1e})"));
    }
    let secs = start.elapsed().as_secs_f64();
    report(4, pass && secs < 60.0, format!("{}; {secs:.1}s", lines.join("; ")));
}

#[test]
fn criterion_05_svrg_exact_at_anchor() {
    let bp = synthetic::quadratic_rows(40, 4, 3, 5);
    let p = bp.problem.clone();
    let mut runner = TestRunner::new(Config { cases: 100, ..Config::default() });
    let strategy = (prop::collection::vec(-3.0f64..3.0, 4), 1usize..=40, 1usize..=40, any::<bool>(), any::<u64>());
    let result = runner.run(&strategy, |(anchor, bg, bj, shared, seed)| {
        let x0 = Vector::new(anchor).unwrap();
        let spec = BatchSpec { size_g: bg.max(bj), size_j: bj, shared };
        let mut state = EstimatorState::from_seed(Scheme::SvrgCorrected, seed);
        state.anchor_reset(&p, &x0, &BatchSpec::full(40)).unwrap();
        let out = state.inner_update(&p, &x0, &spec).unwrap();
        prop_assert_eq!(out.g_tilde, full_average_map(&p, &x0).unwrap());
        prop_assert_eq!(out.j_tilde, full_average_jacobian(&p, &x0).unwrap());
        Ok(())
    });
    report(5, result.is_ok(), format!("100 random anchors: {result:?}"));
}

#[test]
fn criterion_06_schedule_formulas() {
    let svrg = schedule_svrg_finite(10_000, 0.1, 1.0, Horizon::Fixed(1)).unwrap().epochs[0];
    let sarah = schedule_sarah_finite_smooth(10_000, 0.1, 1.0, Horizon::Fixed(1)).unwrap().epochs[0];
    let ones = SmoothnessConstants {
        ell_f: 1.0,
        lip_f: Some(1.0),
        ell_g: Some(1.0),
        lip_g: 1.0,
        sigma_g: Some(1.0),
        sigma_jac: Some(1.0),
    };
    let ns = schedule_sarah_expect_nonsmooth(&ones, 0.01, 4.0, Horizon::Fixed(1)).unwrap().epochs[0];
    let got = [
        (svrg.tau, svrg.inner.size_g, svrg.inner.size_j),
        (sarah.tau, sarah.inner.size_g, sarah.inner.size_j),
    ];
    let got_ns = (ns.tau, ns.anchor.size_g, ns.anchor.size_j, ns.inner.size_g, ns.inner.size_j);
    report(
        6,
        got == [(3, 6340, 40), (100, 200, 200)] && got_ns == (10, 62_500, 19, 6250, 30),
        format!("svrg {:?}, sarah finite {:?}, sarah expectation {got_ns:?}", got[0], got[1]),
    );
}

/// `c_i(x) = sin(a_iᵀx) + ½ (b_iᵀx)²` paired with a zero second output.
struct SmoothScalar {
    a: Vec<Vector>,
    b: Vec<Vector>,
}

impl ComponentOracle for SmoothScalar {
    fn dims(&self) -> (usize, usize) {
        (self.a[0].len(), 2)
    }
    fn eval_map(&self, t: usize, x: &Vector) -> Vector {
        let (u, v) = (self.a[t].dot(x), self.b[t].dot(x));
        Vector::new(vec![u.sin() + 0.5 * v * v, 0.0]).unwrap()
    }
    fn eval_jac(&self, t: usize, x: &Vector) -> Matrix {
        let (u, v) = (self.a[t].dot(x), self.b[t].dot(x));
        let row = self.a[t].scale(u.cos()).add_scaled(v, &self.b[t]);
        let n = row.len();
        let mut data = row.into_vec();
        data.extend(std::iter::repeat_n(0.0, n));
        Matrix::new(2, n, data).unwrap()
    }
}

#[test]
fn criterion_07_gradient_mapping_is_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (count, n) = (15, 4);
    let oracle = SmoothScalar {
        a: (0..count).map(|_| uniform_vec(&mut rng, n, -1.0, 1.0)).collect(),
        b: (0..count).map(|_| uniform_vec(&mut rng, n, -1.0, 1.0)).collect(),
    };
    let analytic = |x: &Vector| {
        let mut gr = Vector::zeros(n);
        for i in 0..count {
            let (u, v) = (oracle.a[i].dot(x), oracle.b[i].dot(x));
            gr.axpy(u.cos() / count as f64, &oracle.a[i]);
            gr.axpy(v / count as f64, &oracle.b[i]);
        }
        gr
    };
    let grads: Vec<(Vector, Vector)> = (0..5)
        .map(|_| {
            let x = uniform_vec(&mut rng, n, -2.0, 2.0);
            let g = analytic(&x);
            (x, g)
        })
        .collect();
    let problem = CompositeProblem::new(
        Arc::new(oracle),
        SamplingRegime::FiniteSum { n: count },
        OuterFunction::AffinePlusHinge { rho: 0.0 },
        Regularizer::Zero,
        SmoothnessConstants { ell_f: 1.0, lip_g: 3.0, ..Default::default() },
    )
    .unwrap();
    let (mut worst, mut spread) = (0.0f64, 0.0f64);
    for (x, g) in &grads {
        let maps: Vec<Vector> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&m| exact_gradient_mapping(&problem, x, m, &SolverOptions::default()).unwrap())
            .collect();
        for gm in &maps {
            worst = worst.max(gm.dist(g));
            spread = spread.max(gm.dist(&maps[0]));
        }
    }
    report(
        7,
        worst <= 1e-8 && spread <= 1e-8,
        format!("max |G_M - grad| {worst:.2e}, max M-spread {spread:.2e}"),
    );
}

fn samples_to_reach(r: &RunResult, tol: f64) -> Option<u64> {
    r.trace.iter().find(|t| t.grad_map_sq <= tol).map(|t| t.samples_g)
}

#[test]
fn criterion_08_variance_reduction_saves_samples() {
    let start = std::time::Instant::now();
    const N: usize = 2000;
    let (m, tau, b) = (1.0, 10, 44);
    let tol = 1e-3;
    let x0 = Vector::zeros(20);
    let (mut det, mut svr, mut sarah) = (Vec::new(), Vec::new(), Vec::new());
    let mut stagnates = true;
    let mut gaps = Vec::new();
    for seed in [101u64, 102, 103, 104, 105] {
        let p = multiloss_oracle(&synthetic_multiloss_instance(N, 20, 0.0, seed)).unwrap();
        let obs = || MetricsObserver::new(&p, m, 1);
        let d = run_deterministic_pl(&p, m, 150, &x0, &SolverOptions::default(), &mut obs()).unwrap();
        let inner = BatchSpec::new(b, b, true).unwrap();
        let s = Schedule::uniform(30, tau, BatchSpec::full(N), inner, m);
        let v = run_svr_pl(&p, Scheme::SvrgCorrected, &s, &x0, seed, &mut obs()).unwrap();
        let s2 = Schedule::uniform(30, tau, BatchSpec::full(N), BatchSpec::new(2 * b, 2 * b, false).unwrap(), m);
        let h = run_svr_pl(&p, Scheme::Sarah, &s2, &x0, seed, &mut obs()).unwrap();
        let iters = (v.total_calls_g / b as u64) as usize;
        let mb = run_minibatch_pl(&p, &Schedule::uniform(1, iters, inner, inner, m), &x0, seed, &mut obs()).unwrap();

        let cost = |r: &RunResult| samples_to_reach(r, tol).map_or(f64::INFINITY, |s| s as f64);
        det.push(cost(&d));
        svr.push(cost(&v));
        sarah.push(cost(&h));
        let spl_best = mb.trace.iter().map(|t| t.grad_map_sq).fold(f64::INFINITY, f64::min);
        let svr_end = v.trace.last().unwrap().grad_map_sq;
        stagnates &= spl_best > svr_end;
        gaps.push(format!("{spl_best:.1e}/{svr_end:.1e}"));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (md, mv, ms) = (mean(&det), mean(&svr), mean(&sarah));
    let secs = start.elapsed().as_secs_f64();
    report(
        8,
        md.is_finite() && mv <= 0.5 * md && ms <= 0.5 * md && stagnates && secs < 300.0,
        format!(
            "mean samples to ||G||^2<=1e-3: deterministic {md:.0}, svrg {mv:.0}, sarah {ms:.0}; \
             mini-batch best vs svrg at equal budget {gaps:?}; {secs:.1}s"
        ),
    );
}

#[test]
fn criterion_09_deterministic_monotone() {
    let mut failures = Vec::new();
    for bp in builtin_problems() {
        let c = &bp.problem.constants;
        let m = match 4.0 * c.ell_f * c.lip_g {
            v if v > 0.0 => v,
            _ => 1.0,
        };
        let mut prev = f64::INFINITY;
        let mut worst = f64::NEG_INFINITY;
        let problem = bp.problem.clone();
        let mut obs = |cp: &Checkpoint<'_>| -> Result<Option<TraceRecord>, MetricsError> {
            let v = objective_value(&problem, cp.x)?;
            worst = worst.max(v - prev);
            prev = v;
            Ok(None)
        };
        run_deterministic_pl(&bp.problem, m, 100, &bp.x0, &SolverOptions::default(), &mut obs).unwrap();
        if worst > 1e-10 {
            failures.push(format!("{} increased by {worst:.2e}", bp.name));
        }
    }
    report(9, failures.is_empty(), format!("{} problems, failures {failures:?}", builtin_problems().len()));
}

fn trace_bytes(p: &CompositeProblem, scheme: Scheme, s: &Schedule, x0: &Vector, seed: u64) -> (RunResult, Vec<u8>) {
    let r = run_svr_pl(p, scheme, s, x0, seed, &mut MetricsObserver::new(p, s.penalty, 3)).unwrap();
    let mut buf = Vec::new();
    emit_trace(&r.trace, &mut buf).unwrap();
    (r, buf)
}

#[test]
fn criterion_10_counters_and_reproducibility() {
    let bp = synthetic::quadratic_rows(100, 4, 3, 8);
    let p = &bp.problem;
    let svrg = Schedule::uniform(4, 5, BatchSpec::full(100), BatchSpec::new(12, 5, true).unwrap(), 4.0);
    let sarah = schedule_sarah_finite_smooth(100, 0.1, 4.0, Horizon::Fixed(3)).unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for (scheme, s) in [(Scheme::SvrgCorrected, &svrg), (Scheme::Sarah, &sarah)] {
        let (a, bytes_a) = trace_bytes(p, scheme, s, &bp.x0, 42);
        let (_, bytes_b) = trace_bytes(p, scheme, s, &bp.x0, 42);
        let last = a.trace.last().unwrap();
        let exact = (a.total_calls_g, a.total_calls_j) == s.implied_calls()
            && (last.samples_g, last.samples_j) == s.implied_calls();
        ok &= exact && bytes_a == bytes_b;
        notes.push(format!("{scheme:?}: calls {:?} identical {}", s.implied_calls(), bytes_a == bytes_b));
    }
    let mb = BatchSpec::new(7, 3, false).unwrap();
    let ms = Schedule::uniform(1, 9, mb, mb, 4.0);
    let r = run_minibatch_pl(p, &ms, &bp.x0, 1, &mut NoObserver).unwrap();
    ok &= (r.total_calls_g, r.total_calls_j) == (63, 27);
    notes.push(format!("MiniBatch: calls ({}, {})", r.total_calls_g, r.total_calls_j));
    report(10, ok, notes.join("; "));
}
