//! Acceptance suite. Runs every criterion, prints one pass/fail line each
//! and exits nonzero if any criterion fails.

mod common;

use std::sync::Arc;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cocoa_core::bench::rates::fit_rate;
use cocoa_core::bench::synth::SynthSpec;
use cocoa_core::cluster::Transport;
use cocoa_core::local_solver::{exact_solve, subproblem_difference, ExactSolveOptions, LocalColumns, SubproblemView};
use cocoa_core::metrics::MetricsRow;
use cocoa_core::orchestrator::{
    calibrate_budgets, convex_comb_audit, corollary1_iteration_check, geometric_grid, recurrence_residual, run,
    theorem1_exact_audit, theta_upper_bound, Algorithm, BoundInputs, Driver, DriverOptions, EpsSchedule, InnerSolver,
    ThetaSequence,
};
use cocoa_core::partition::{mask, partition_balanced};
use cocoa_core::problems::duality_gap;
use cocoa_core::{AggregationParams, ColMatrix, HingeSvmDualInstance, LassoInstance, ObjectivePair, Partition, Problem};

use common::*;

type Res<T> = std::result::Result<T, Box<dyn std::error::Error>>;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn exact() -> InnerSolver {
    InnerSolver::Exact(ExactSolveOptions::default())
}

fn opts(alg: Algorithm, params: AggregationParams, solver: InnerSolver) -> DriverOptions {
    let mut o = DriverOptions::new(alg, params, solver);
    o.wall_clock = false;
    o
}

fn sub(rows: &[MetricsRow], t: usize) -> f64 {
    rows[t].suboptimality.expect("suboptimality column")
}

// ---------------------------------------------------------------- 1

fn theta_sequence() -> Res<Verdict> {
    let mut worst_res: f64 = 0.0;
    let mut ok = true;
    for gamma in [0.25, 0.5, 1.0] {
        let mut seq = ThetaSequence::new(gamma)?;
        let mut prev = seq.current();
        ok &= prev == 1.0;
        for t in 1..=10_000usize {
            let next = seq.advance();
            let res = recurrence_residual(gamma, prev, next);
            worst_res = worst_res.max(res);
            ok &= next > 0.0 && next < prev && res < 1e-12 && next <= theta_upper_bound(gamma, t);
            // the textbook closed form must agree with the stable one
            ok &= (next - theta_closed_form(gamma, prev)).abs() <= 1e-14 * prev.max(1e-300) + 1e-300;
            prev = next;
        }
    }
    Ok(Verdict::new(ok, format!("max residual {worst_res:.2e}")))
}

// ---------------------------------------------------------------- 2

fn combination_audit() -> Res<Verdict> {
    let fx = lasso_fixture(SynthSpec::new(60, 20, 21), 0.05, false);
    let part = partition_balanced(60, 3, 2)?;
    let params = AggregationParams::new(1.0 / 3.0, 1.0, 3)?;
    let mut o = opts(Algorithm::Accelerated, params, InnerSolver::Sdca { h: 60 });
    o.keep_history = true;
    let out = run(&fx.problem, fx.matrix.clone(), &part, o, None, 30)?;
    let rep = convex_comb_audit(out.history.as_ref())?;
    let recon = rep.max_reconstruction_error();
    let ok = rep.min_coefficient >= 0.0 && rep.max_sum_error <= 1e-12 && recon <= 1e-8;
    Ok(Verdict::new(
        ok,
        format!(
            "min rho {:.2e}, sum error {:.2e}, reconstruction {:.2e}",
            rep.min_coefficient, rep.max_sum_error, recon
        ),
    ))
}

// ---------------------------------------------------------------- 3 and 7

struct BoundRun {
    gamma: f64,
    params: AggregationParams,
    c: f64,
}

struct BoundSetup {
    fx: Fixture,
    part: Partition,
    runs: Vec<BoundRun>,
}

fn bound_runs() -> Res<(Verdict, BoundSetup)> {
    let mut spec = SynthSpec::new(40, 10, 5);
    spec.sparsity = 0.3;
    let fx = lasso_fixture(spec, 0.05, true);
    let reference = fx.reference.as_ref().expect("reference");
    let part = partition_balanced(40, 2, 3)?;
    let alpha0 = vec![0.0; 40];
    let mut runs = Vec::new();
    let mut ok = true;
    let mut details = Vec::new();
    for gamma in [0.5, 1.0] {
        let params = AggregationParams::safe(gamma, 2)?;
        let mut o = opts(Algorithm::Accelerated, params, exact());
        o.ref_opt = Some(reference.opt_value);
        o.keep_history = true;
        let out = run(&fx.problem, fx.matrix.clone(), &part, o, None, 100)?;
        let cert = theorem1_exact_audit(
            &out.rows,
            Some(&reference.alpha),
            out.history.as_ref(),
            BoundInputs {
                matrix: &fx.matrix,
                partition: &part,
                gamma,
                sigma_prime: params.sigma_prime,
                smoothness: fx.problem.smoothness(),
                alpha0: &alpha0,
                r_cap: None,
            },
        )?;
        ok &= cert.holds(1e-8);
        details.push(format!("gamma {gamma}: max(lhs - rhs) {:.2e}", cert.max_excess));
        runs.push(BoundRun { gamma, params, c: cert.c });
    }
    let setup = BoundSetup { fx, part, runs };
    Ok((Verdict::new(ok, details.join(", ")), setup))
}

/// Continues the gamma = 1 configuration until the target is hit or the
/// predicted iteration limit is passed.
fn iteration_count(setup: &BoundSetup) -> Res<Verdict> {
    const EPS: f64 = 1e-4;
    let r = setup.runs.iter().find(|r| r.gamma == 1.0).expect("gamma = 1 run");
    let smoothness = setup.fx.problem.smoothness();
    let limit = (2.0 * smoothness * r.params.sigma_prime * r.c / EPS).sqrt().ceil() as usize + 1;
    let mut o = opts(Algorithm::Accelerated, r.params, exact());
    o.ref_opt = setup.fx.reference.as_ref().map(|x| x.opt_value);
    let mut d = Driver::new(&setup.fx.problem, setup.fx.matrix.clone(), &setup.part, o, None)?;
    while d.t() < limit && sub(d.rows(), d.t()) > EPS {
        d.step()?;
    }
    let chk = corollary1_iteration_check(d.rows(), EPS, smoothness, r.params.sigma_prime, r.c)?;
    Ok(Verdict::new(
        chk.passed,
        format!("first t {:?}, limit {}", chk.first_t, chk.limit),
    ))
}

// ---------------------------------------------------------------- 4

fn rate_separation() -> Res<Verdict> {
    let mut spec = SynthSpec::new(200, 50, 7);
    spec.sparsity = 0.3;
    spec.decay = 0.85;
    let fx = lasso_fixture(spec, 0.01, true);
    let opt = fx.reference.as_ref().expect("reference").opt_value;
    let part = partition_balanced(200, 4, 1)?;
    let params = AggregationParams::safe(1.0, 4)?;
    let mut final_sub = Vec::new();
    let mut slopes = Vec::new();
    for alg in [Algorithm::Accelerated, Algorithm::Baseline] {
        let mut o = opts(alg, params, exact());
        o.ref_opt = Some(opt);
        let out = run(&fx.problem, fx.matrix.clone(), &part, o, None, 300)?;
        slopes.push(fit_rate(&out.rows, "suboptimality", (75, 300))?.slope);
        final_sub.push(sub(&out.rows, 300));
    }
    let ratio = final_sub[0] / final_sub[1];
    let ok = slopes[0] <= -1.7 && slopes[1] >= -1.4 && ratio <= 0.1;
    Ok(Verdict::new(
        ok,
        format!(
            "slope acc {:.3}, baseline {:.3}, final ratio {:.3}",
            slopes[0], slopes[1], ratio
        ),
    ))
}

// ---------------------------------------------------------------- 5 and 6

fn svm(lambda_reg: f64) -> Fixture {
    svm_fixture(SynthSpec::new(120, 30, 1), lambda_reg)
}

fn svm_gap() -> Res<Verdict> {
    let fx = svm(1e-2);
    let part = partition_balanced(120, 4, 1)?;
    let params = AggregationParams::safe(1.0, 4)?;
    let out = run(
        &fx.problem,
        fx.matrix.clone(),
        &part,
        opts(Algorithm::Accelerated, params, InnerSolver::Sdca { h: 200 }),
        None,
        200,
    )?;
    let gaps: Vec<f64> = out.rows.iter().map(|r| r.duality_gap.expect("gap column")).collect();
    let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let last = *gaps.last().unwrap();
    Ok(Verdict::new(
        min >= -1e-10 && last <= 1e-3,
        format!("min gap {min:.2e}, final gap {last:.2e}"),
    ))
}

fn rounds_to_gap(fx: &Fixture, part: &Partition, alg: Algorithm, target: f64, cap: usize) -> Res<usize> {
    let params = AggregationParams::safe(1.0, part.num_workers())?;
    let o = opts(alg, params, InnerSolver::Sdca { h: 200 });
    let mut d = Driver::new(&fx.problem, fx.matrix.clone(), part, o, None)?;
    loop {
        let row = d.rows().last().unwrap();
        if row.duality_gap.expect("gap column") <= target {
            return Ok(row.t);
        }
        if row.t >= cap {
            return Err(format!("{alg} did not reach gap {target} in {cap} rounds").into());
        }
        d.step()?;
    }
}

fn lambda_sensitivity() -> Res<Verdict> {
    let part = partition_balanced(120, 4, 1)?;
    let mut ratios = Vec::new();
    let mut details = Vec::new();
    for lambda_reg in [1e-2, 1e-4] {
        let fx = svm(lambda_reg);
        let acc = rounds_to_gap(&fx, &part, Algorithm::Accelerated, 1e-2, 5000)?;
        let base = rounds_to_gap(&fx, &part, Algorithm::Baseline, 1e-2, 5000)?;
        let ratio = base as f64 / acc as f64;
        details.push(format!("lambda {lambda_reg:.0e}: {base}/{acc} = {ratio:.2}"));
        ratios.push(ratio);
    }
    Ok(Verdict::new(ratios[1] > ratios[0], details.join(", ")))
}

// ---------------------------------------------------------------- 8

fn communication() -> Res<Verdict> {
    let (d, k, rounds) = (50usize, 4usize, 10usize);
    let mut ok = true;
    let mut per_round = Vec::new();
    for n in [100usize, 1000] {
        let fx = lasso_fixture(SynthSpec::new(n, d, 3), 0.1, false);
        let part = partition_balanced(n, k, 1)?;
        let params = AggregationParams::safe(1.0, k)?;
        let out = run(
            &fx.problem,
            fx.matrix.clone(),
            &part,
            opts(Algorithm::Accelerated, params, InnerSolver::Sdca { h: 20 }),
            None,
            rounds,
        )?;
        let s = out.stats;
        ok &= s.reduces == rounds as u64 && s.broadcasts == rounds as u64;
        ok &= s.bytes_total() == (rounds * 2 * k * d * 8) as u64;
        for w in out.rows.windows(2) {
            ok &= w[1].bytes_total - w[0].bytes_total == (2 * k * d * 8) as u64;
        }
        per_round.push(format!("n {n}: {} bytes/round", s.bytes_total() / rounds as u64));
    }
    Ok(Verdict::new(ok, per_round.join(", ")))
}

// ---------------------------------------------------------------- 9

fn orthonormal_columns(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for q in &cols {
                let p: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        cols.push(v);
    }
    cols
}

fn matrix_from_columns(cols: &[Vec<f64>]) -> ColMatrix {
    let d = cols[0].len();
    let rows: Vec<Vec<f64>> = (0..d).map(|j| cols.iter().map(|c| c[j]).collect()).collect();
    ColMatrix::from_dense_rows(&rows).expect("dense matrix")
}

/// Max deviation between the distributed iterates and an oracle trace.
fn trace_deviation(model: &DenseLasso, alg: Algorithm, oracle: &[Vec<f64>]) -> Res<f64> {
    let matrix = Arc::new(matrix_from_columns(&model.cols));
    let n = model.cols.len();
    let problem = LassoInstance::new(model.b.clone().into(), model.lambda1)?;
    let part = partition_balanced(n, 1, 0)?;
    let params = AggregationParams::new(1.0, 1.0, 1)?;
    let mut d = Driver::new(&problem, matrix, &part, opts(alg, params, exact()), None)?;
    let mut worst = max_abs_diff(d.alpha().as_slice(), &oracle[0]);
    for want in &oracle[1..] {
        d.step()?;
        worst = worst.max(max_abs_diff(d.alpha().as_slice(), want));
    }
    Ok(worst)
}

fn lasso_model(cols: Vec<Vec<f64>>, seed: u64, lam_rel: f64) -> DenseLasso {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = cols[0].len();
    let b: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let lmax = cols
        .iter()
        .map(|c| c.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>().abs())
        .fold(0.0, f64::max);
    DenseLasso::new(cols, b, lam_rel * lmax)
}

fn k1_equivalence() -> Res<Verdict> {
    const ITERS: usize = 50;
    let generic = {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cols: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..20).map(|_| rng.random_range(-1.0..1.0) / 20f64.sqrt()).collect())
            .collect();
        lasso_model(cols, 18, 0.2)
    };
    let ortho = lasso_model(orthonormal_columns(20, 8, 19), 20, 0.2);
    let devs = [
        trace_deviation(&generic, Algorithm::Accelerated, &accelerated_oracle(&generic, ITERS))?,
        trace_deviation(&generic, Algorithm::Baseline, &prox_gradient_oracle(&generic, ITERS))?,
        trace_deviation(&ortho, Algorithm::Accelerated, &classic_accelerated(&ortho, ITERS))?,
        trace_deviation(&ortho, Algorithm::Baseline, &classic_prox_gradient(&ortho, ITERS))?,
    ];
    let worst = devs.iter().copied().fold(0.0, f64::max);
    Ok(Verdict::new(
        worst <= 1e-8,
        format!(
            "acc {:.1e}, baseline {:.1e} (generic); acc {:.1e}, baseline {:.1e} (orthonormal)",
            devs[0], devs[1], devs[2], devs[3]
        ),
    ))
}

// ---------------------------------------------------------------- 10

fn inexact_schedules() -> Res<Verdict> {
    const T: usize = 100;
    let fx = lasso_fixture(SynthSpec::new(60, 20, 23), 0.05, true);
    let opt = fx.reference.as_ref().expect("reference").opt_value;
    let part = partition_balanced(60, 2, 4)?;
    let params = AggregationParams::safe(1.0, 2)?;
    let grid = geometric_grid(15, 12);
    let table = calibrate_budgets(&fx.problem, fx.matrix.clone(), &part, params, 9, grid, T)?;
    // a level that buys a mid-sized budget
    let r = table.levels()[3].max(1e-14);

    let mut o = opts(Algorithm::Accelerated, params, exact());
    o.ref_opt = Some(opt);
    o.seed = 9;
    let exact_run = run(&fx.problem, fx.matrix.clone(), &part, o, None, T)?;

    let mut ok = true;
    let mut details = Vec::new();
    let mut poly_final = f64::NAN;
    for schedule in [EpsSchedule::constant(r)?, EpsSchedule::polynomial(r, 3.0)?] {
        let mut o = opts(
            Algorithm::Accelerated,
            params,
            InnerSolver::Scheduled {
                schedule,
                table: table.clone(),
            },
        );
        o.ref_opt = Some(opt);
        o.seed = 9;
        o.measure_eps_every = Some(10);
        let out = run(&fx.problem, fx.matrix.clone(), &part, o, None, T)?;
        let mut worst: f64 = 0.0;
        let mut sampled = 0;
        for (row, next) in out.rows.iter().zip(&out.rows[1..]) {
            // the solve of round t is reported on row t + 1
            if let Some(eps) = next.eps_measured {
                let allowed = 2.0 * schedule.a(row.t) * row.theta.expect("theta column");
                worst = worst.max(eps / allowed);
                sampled += 1;
            }
        }
        ok &= sampled >= T / 10 && worst <= 1.0;
        details.push(format!("{schedule}: max eps/(2 a theta) {worst:.2}"));
        if matches!(schedule, EpsSchedule::Polynomial { .. }) {
            poly_final = sub(&out.rows, T);
        }
    }
    let exact_final = sub(&exact_run.rows, T);
    ok &= poly_final <= 3.0 * exact_final;
    details.push(format!("final sub poly/exact {:.3}", poly_final / exact_final));
    Ok(Verdict::new(ok, details.join(", ")))
}

// ---------------------------------------------------------------- 11

fn runner(cases: u32, seed: u8) -> TestRunner {
    let cfg = PtConfig {
        cases,
        failure_persistence: None,
        ..PtConfig::default()
    };
    TestRunner::new_with_rng(cfg, proptest::test_runner::TestRng::from_seed(
        proptest::test_runner::RngAlgorithm::ChaCha,
        &[seed; 32],
    ))
}

fn random_svm(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (ColMatrix, HingeSvmDualInstance) {
    let rows: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let labels = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let lambda = 10f64.powf(rng.random_range(-4.0..0.0));
    (
        ColMatrix::from_dense_rows(&rows).unwrap(),
        HingeSvmDualInstance::new(labels, lambda).unwrap(),
    )
}

fn conjugacy_grid() -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    let lasso = LassoInstance::new(vec![0.5, -1.0, 2.0].into(), 0.7).unwrap();
    let svm = HingeSvmDualInstance::new(vec![1.0, -1.0, 1.0, -1.0], 0.3).unwrap();
    let grid: Vec<f64> = (0..=4000).map(|j| -4.0 + 8.0 * j as f64 / 4000.0).collect();
    let check = |p: &dyn ObjectivePair, i: usize, s: f64, grid: &[f64]| -> f64 {
        let brute = grid
            .iter()
            .map(|&a| a * s - p.g_value(i, a))
            .fold(f64::NEG_INFINITY, f64::max);
        (p.g_conj_value(i, s) - brute).abs()
    };
    for j in 0..=69 {
        let s = -0.69 + 0.02 * j as f64;
        worst = worst.max(check(&lasso, 1, s, &grid));
    }
    if lasso.g_conj_value(0, 0.71).is_finite() {
        return Err("lasso conjugate finite outside its support".into());
    }
    // hinge domain is y a in [0, 1/n]; include both ends in the grid
    let dom: Vec<f64> = (0..=1000).map(|j| -0.25 + 0.5 * j as f64 / 1000.0).collect();
    for i in 0..4 {
        for j in 0..=80 {
            let s = -4.0 + 0.1 * j as f64;
            worst = worst.max(check(&svm, i, s, &dom));
        }
    }
    // f and f* through the Fenchel-Young equality at w = grad f(u)
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let u: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let w = lasso.f_grad(&u);
        let fy = lasso.f_value(&u) + lasso.f_conj_value(w.as_slice()) - cocoa_core::linalg::dot(&u, w.as_slice());
        worst = worst.max(fy.abs());
    }
    let u = [0.3, -1.2, 0.8];
    let svm3 = HingeSvmDualInstance::new(vec![1.0, 1.0, -1.0], 0.3).unwrap();
    let w = svm3.f_grad(&u);
    let fy = svm3.f_value(&u) + svm3.f_conj_value(w.as_slice()) - cocoa_core::linalg::dot(&u, w.as_slice());
    worst = worst.max(fy.abs());
    if worst > 1e-6 {
        return Err(format!("conjugacy error {worst:.2e}"));
    }
    Ok(worst)
}

fn weak_duality() -> Result<(), String> {
    let mut tr = runner(1000, 31);
    tr.run(&(any::<u64>(), 2usize..12, 1usize..8), |(seed, n, d)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, p) = random_svm(&mut rng, n, d);
        let alpha: Vec<f64> = p
            .labels
            .iter()
            .map(|y| y * rng.random_range(0.0..=1.0) / n as f64)
            .collect();
        let gap = duality_gap(&p, &m, &alpha).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(gap >= -1e-10, "gap {gap}");
        Ok(())
    })
    .map_err(|e| e.to_string())
}

fn gradient_fd() -> Result<(), String> {
    let mut tr = runner(200, 32);
    tr.run(
        &(prop::collection::vec(-3.0f64..3.0, 4), prop::collection::vec(-3.0f64..3.0, 4), 1e-3f64..10.0),
        |(u, b, lambda)| {
            let lasso = LassoInstance::new(b.into(), 0.1).unwrap();
            let svm = HingeSvmDualInstance::new(vec![1.0; 3], lambda).unwrap();
            for p in [&lasso as &dyn ObjectivePair, &svm] {
                let g = p.f_grad(&u);
                for i in 0..u.len() {
                    let h = 1e-5;
                    let mut up = u.clone();
                    let mut dn = u.clone();
                    up[i] += h;
                    dn[i] -= h;
                    let fd = (p.f_value(&up) - p.f_value(&dn)) / (2.0 * h);
                    prop_assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()), "coord {i}: {fd} vs {}", g[i]);
                }
            }
            Ok(())
        },
    )
    .map_err(|e| e.to_string())
}

fn mask_unity() -> Result<(), String> {
    let mut tr = runner(300, 33);
    tr.run(
        &(1usize..40, 1usize..6, any::<u64>()).prop_flat_map(|(n, k, seed)| {
            (Just(n.max(k)), Just(k), Just(seed), prop::collection::vec(-5.0f64..5.0, n.max(k)))
        }),
        |(n, k, seed, alpha)| {
            let part = partition_balanced(n, k, seed).unwrap();
            let mut total = vec![0.0; n];
            let mut owners = vec![0usize; n];
            for kk in 0..k {
                let m = mask(&alpha, &part, kk).unwrap();
                for i in 0..n {
                    total[i] += m[i];
                    if part.owner(i) != kk {
                        prop_assert_eq!(m[i], 0.0);
                    } else {
                        owners[i] += 1;
                    }
                }
            }
            prop_assert_eq!(&total, &alpha);
            prop_assert!(owners.iter().all(|&c| c == 1));
            Ok(())
        },
    )
    .map_err(|e| e.to_string())
}

fn growth_inequality() -> Result<(), String> {
    let mut tr = runner(200, 34);
    tr.run(&(any::<u64>(), 0.05f64..1.0, 1.0f64..4.0, any::<bool>()), |(seed, theta, sigma_prime, use_svm)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, d) = (6, 5);
        let (m, problem) = if use_svm {
            let (m, p) = random_svm(&mut rng, n, d);
            (m, Problem::SvmDual(p))
        } else {
            let rows: Vec<Vec<f64>> = (0..d)
                .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let b: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            (
                ColMatrix::from_dense_rows(&rows).unwrap(),
                Problem::Lasso(LassoInstance::new(b.into(), 0.2).unwrap()),
            )
        };
        let block = [0usize, 2, 3];
        let feasible = |rng: &mut ChaCha8Rng, i: usize| match &problem {
            Problem::SvmDual(p) => p.labels[i] * rng.random_range(0.0..=1.0) / n as f64,
            Problem::Lasso(_) => rng.random_range(-1.0..1.0),
        };
        let y: Vec<f64> = block.iter().map(|&i| feasible(&mut rng, i)).collect();
        let z0: Vec<f64> = block.iter().map(|&i| feasible(&mut rng, i)).collect();
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let view = SubproblemView {
            problem: &problem,
            cols: LocalColumns::new(&m, &block),
            w: &w,
            y_block: &y,
            z_start: &z0,
            theta,
            sigma_prime,
            smoothness: problem.smoothness(),
            f_over_k: 0.0,
        };
        let star = exact_solve(&view, ExactSolveOptions::default()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let zs = star.z_block_new.as_slice();
        for _ in 0..20 {
            let u: Vec<f64> = block.iter().map(|&i| feasible(&mut rng, i)).collect();
            let diff = subproblem_difference(&view, &u, zs).unwrap();
            let img = LocalColumns::new(&m, &block).image(&cocoa_core::linalg::sub(&u, zs));
            let need = 0.5 * view.quad_coef() * img.norm_sq();
            prop_assert!(diff >= need - 1e-8, "G(u) - G(z*) = {diff}, need {need}");
        }
        Ok(())
    })
    .map_err(|e| e.to_string())
}

fn transport_transparency() -> Result<(), String> {
    let fx = lasso_fixture(SynthSpec::new(40, 12, 8), 0.1, false);
    let part = partition_balanced(40, 3, 2).unwrap();
    let params = AggregationParams::safe(1.0, 3).unwrap();
    let mut traces = Vec::new();
    for transport in [Transport::InProcess, Transport::LoopbackSocket] {
        let mut o = opts(Algorithm::Accelerated, params, InnerSolver::Sdca { h: 30 });
        o.transport = transport;
        o.seed = 77;
        o.keep_history = true;
        let out = run(&fx.problem, fx.matrix.clone(), &part, o, None, 15).map_err(|e| e.to_string())?;
        traces.push(out);
    }
    let (a, b) = (&traces[0], &traces[1]);
    let same_rows = a.rows == b.rows;
    let same_hist = a.history == b.history;
    if same_rows && same_hist && a.stats == b.stats {
        Ok(())
    } else {
        Err("in-process and loopback traces differ".into())
    }
}

fn property_suites() -> Res<Verdict> {
    let mut failures = Vec::new();
    let conj = conjugacy_grid();
    let suites: [(&str, Result<(), String>); 6] = [
        ("conjugacy", conj.as_ref().map(|_| ()).map_err(Clone::clone)),
        ("weak duality", weak_duality()),
        ("gradient", gradient_fd()),
        ("mask", mask_unity()),
        ("growth", growth_inequality()),
        ("transport", transport_transparency()),
    ];
    for (name, r) in &suites {
        if let Err(e) = r {
            failures.push(format!("{name}: {e}"));
        }
    }
    let detail = if failures.is_empty() {
        format!("6 suites green, conjugacy error {:.1e}", conj.unwrap_or(f64::NAN))
    } else {
        failures.join("; ")
    };
    Ok(Verdict::new(failures.is_empty(), detail))
}

// ----------------------------------------------------------------

fn report(id: usize, name: &str, limit: f64, secs: f64, v: Res<Verdict>) -> bool {
    let (pass, detail) = match v {
        Ok(v) => (v.pass && secs < limit, v.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "criterion {id:>2} [{}] {name}: {detail} | {secs:.2}s (limit {limit}s)",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn main() {
    let mut all = true;

    let (v, s) = timed(theta_sequence);
    all &= report(1, "theta sequence", 1.0, s, v);
    let (v, s) = timed(combination_audit);
    all &= report(2, "convex combination audit", 5.0, s, v);

    let (res, s3) = timed(bound_runs);
    let (v3, setup) = match res {
        Ok((v, setup)) => (Ok(v), Some(setup)),
        Err(e) => (Err(e), None),
    };
    all &= report(3, "exact-case bound", 30.0, s3, v3);

    let (v, s) = timed(rate_separation);
    all &= report(4, "rate separation", 120.0, s, v);
    let (v, s) = timed(svm_gap);
    all &= report(5, "duality-gap certification", 60.0, s, v);
    let (v, s) = timed(lambda_sensitivity);
    all &= report(6, "lambda sensitivity", 180.0, s, v);

    let (v7, s7) = timed(|| match &setup {
        Some(r) => iteration_count(r),
        None => Err("criterion 3 runs unavailable".into()),
    });
    all &= report(7, "iteration count", 30.0, s3 + s7, v7);

    let (v, s) = timed(communication);
    all &= report(8, "communication contract", 30.0, s, v);
    let (v, s) = timed(k1_equivalence);
    all &= report(9, "single-worker oracle equivalence", 10.0, s, v);
    let (v, s) = timed(inexact_schedules);
    all &= report(10, "inexact schedules", 120.0, s, v);
    let (v, s) = timed(property_suites);
    all &= report(11, "property suites", 120.0, s, v);

    if !all {
        std::process::exit(1);
    }
}
