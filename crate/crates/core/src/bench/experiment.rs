//! Configured end-to-end runs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{AlgorithmChoice, DataSource, Lambda1, ProblemKind, RunConfig, SigmaChoice, SolverKind};
use super::libsvm::{binarize_labels, load_raw_libsvm, transpose};
use super::rates::{fit_rate, tail_window, RateFit};
use super::reference::{reference_solution, ReferenceOptions, ReferenceSolution};
use super::synth::{synth_lasso, synth_svm};
use crate::error::{Error, Result};
use crate::linalg::{ColMatrix, DenseVec};
use crate::local_solver::ExactSolveOptions;
use crate::metrics::{save_csv, MetricsRow};
use crate::orchestrator::{
    calibrate_budgets, convex_comb_audit, geometric_grid, theorem1_exact_audit, Algorithm, BoundInputs,
    DriverOptions, InnerSolver, RunOutput,
};
use crate::partition::{estimated_sigma_prime, partition_balanced, safe_sigma_prime, AggregationParams, Partition};
use crate::problems::{HingeSvmDualInstance, LassoInstance, ObjectivePair, Problem};

/// A loaded problem with its data and worker partition.
#[derive(Debug, Clone)]
pub struct Instance {
    pub problem: Problem,
    pub matrix: Arc<ColMatrix>,
    pub partition: Partition,
}

/// `max_i |A_i^T b|`, the smallest `lambda1` with an all-zero solution.
pub fn lambda1_max(m: &ColMatrix, b: &[f64]) -> Result<f64> {
    Ok(m.t_mat_vec(b)?.iter().fold(0.0f64, |a, v| a.max(v.abs())))
}

fn lasso_data(cfg: &RunConfig) -> Result<(ColMatrix, DenseVec)> {
    match &cfg.data {
        DataSource::Synthetic(spec) => {
            let p = synth_lasso(spec)?;
            Ok((p.matrix, p.b.expect("lasso instance has b")))
        }
        DataSource::Libsvm(path) => {
            // features become columns, targets become b
            let raw = load_raw_libsvm(path)?;
            let m = transpose(&raw.matrix)?.normalize_columns().0;
            Ok((m, raw.labels.into()))
        }
    }
}

fn svm_data(cfg: &RunConfig) -> Result<(ColMatrix, Vec<f64>)> {
    match &cfg.data {
        DataSource::Synthetic(spec) => {
            let p = synth_svm(spec)?;
            Ok((p.matrix, p.labels.expect("svm instance has labels")))
        }
        DataSource::Libsvm(path) => {
            let raw = load_raw_libsvm(path)?;
            Ok((raw.matrix.normalize_columns().0, binarize_labels(&raw.labels)))
        }
    }
}

pub fn build_instance(cfg: &RunConfig) -> Result<Instance> {
    cfg.validate()?;
    let (problem, matrix) = match cfg.problem {
        ProblemKind::Lasso => {
            let (m, b) = lasso_data(cfg)?;
            let lambda1 = match cfg.lambda1 {
                Lambda1::Absolute(l) => l,
                Lambda1::Relative(r) => r * lambda1_max(&m, &b)?,
            };
            (Problem::Lasso(LassoInstance::new(b, lambda1)?), m)
        }
        ProblemKind::SvmDual => {
            let (m, labels) = svm_data(cfg)?;
            (Problem::SvmDual(HingeSvmDualInstance::new(labels, cfg.lambda_reg)?), m)
        }
    };
    let partition = match &cfg.partition {
        Some(path) => Partition::load_json(path, matrix.cols())?,
        None => partition_balanced(matrix.cols(), cfg.k, cfg.seed)?,
    };
    if partition.num_workers() != cfg.k {
        return Err(Error::InvalidConfig(format!(
            "partition has {} blocks but k = {}",
            partition.num_workers(),
            cfg.k
        )));
    }
    Ok(Instance {
        problem,
        matrix: Arc::new(matrix),
        partition,
    })
}

pub fn aggregation_params(cfg: &RunConfig, inst: &Instance) -> Result<AggregationParams> {
    let gamma = cfg.gamma_value();
    let sigma_prime = match cfg.sigma_prime {
        SigmaChoice::Safe => safe_sigma_prime(gamma, cfg.k)?,
        SigmaChoice::Estimate => estimated_sigma_prime(&inst.matrix, &inst.partition, gamma, cfg.seed)?,
        SigmaChoice::Value(v) => v,
    };
    AggregationParams::new(gamma, sigma_prime, cfg.k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmReport {
    pub algorithm: String,
    pub csv: PathBuf,
    pub final_primal: f64,
    pub final_suboptimality: Option<f64>,
    pub final_gap: Option<f64>,
    pub rate: Option<RateFit>,
    pub reduces: u64,
    pub broadcasts: u64,
    pub bytes_total: u64,
    pub lemma2_max_error: Option<f64>,
    pub theorem1_max_excess: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub gamma: f64,
    pub sigma_prime: f64,
    pub ref_opt: Option<f64>,
    pub runs: Vec<AlgorithmReport>,
}

impl std::fmt::Display for ExperimentReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "gamma = {}, sigma' = {}", self.gamma, self.sigma_prime)?;
        if let Some(o) = self.ref_opt {
            writeln!(f, "reference optimum = {o:.12e}")?;
        }
        for r in &self.runs {
            write!(f, "{:>8}: primal {:.6e}", r.algorithm, r.final_primal)?;
            if let Some(s) = r.final_suboptimality {
                write!(f, ", suboptimality {s:.3e}")?;
            }
            if let Some(g) = r.final_gap {
                write!(f, ", gap {g:.3e}")?;
            }
            match &r.rate {
                Some(fit) => write!(f, ", tail slope {:.3}", fit.slope)?,
                None => write!(f, ", tail slope n/a")?,
            }
            writeln!(f, ", bytes {} ({} rounds) -> {}", r.bytes_total, r.reduces, r.csv.display())?;
        }
        Ok(())
    }
}

fn solver_for(cfg: &RunConfig, inst: &Instance, params: AggregationParams) -> Result<InnerSolver> {
    Ok(match cfg.local_solver {
        SolverKind::Sdca => InnerSolver::Sdca { h: cfg.h },
        SolverKind::Exact => InnerSolver::Exact(ExactSolveOptions::default()),
        SolverKind::Schedule => {
            let schedule = cfg
                .eps_schedule
                .ok_or_else(|| Error::InvalidConfig("schedule solver needs eps_schedule".into()))?;
            let smallest = inst.partition.sizes().into_iter().min().unwrap_or(1);
            let grid = geometric_grid(smallest / 2, 12);
            let table = calibrate_budgets(
                &inst.problem,
                Arc::clone(&inst.matrix),
                &inst.partition,
                params,
                cfg.seed,
                grid,
                cfg.rounds,
            )?;
            log::info!("calibrated budgets {:?} -> levels {:?}", table.grid(), table.levels());
            InnerSolver::Scheduled { schedule, table }
        }
    })
}

/// Runs one algorithm of the configured experiment.
pub fn run_algorithm(
    cfg: &RunConfig,
    inst: &Instance,
    algorithm: Algorithm,
    params: AggregationParams,
    solver: InnerSolver,
    reference: Option<&ReferenceSolution>,
) -> Result<RunOutput> {
    let mut opts = DriverOptions::new(algorithm, params, solver);
    opts.transport = cfg.transport;
    opts.seed = cfg.seed;
    opts.keep_history = cfg.audit_lemma2 || cfg.audit_theorem1;
    opts.measure_eps_every = (cfg.audit_eps_measure > 0).then_some(cfg.audit_eps_measure);
    opts.ref_opt = reference.map(|r| r.opt_value);
    opts.wall_clock = cfg.wall_clock;
    crate::orchestrator::run(
        &inst.problem,
        Arc::clone(&inst.matrix),
        &inst.partition,
        opts,
        None,
        cfg.rounds,
    )
}

fn csv_name(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Accelerated => "acc.csv",
        Algorithm::Baseline => "baseline.csv",
    }
}

fn rate_column(p: &Problem, rows: &[MetricsRow]) -> &'static str {
    if rows.first().is_some_and(|r| r.suboptimality.is_some()) {
        "suboptimality"
    } else if p.supports_gap() {
        "duality_gap"
    } else {
        "primal_value"
    }
}

/// Executes every configured run, writing `acc.csv` / `baseline.csv`,
/// `partition.json`, `config.txt` and `summary.json` into `out_dir`.
pub fn run_experiment(cfg: &RunConfig, out_dir: &Path) -> Result<ExperimentReport> {
    let inst = build_instance(cfg)?;
    let params = aggregation_params(cfg, &inst)?;
    std::fs::create_dir_all(out_dir)?;
    inst.partition.save_json(&out_dir.join("partition.json"))?;
    std::fs::write(out_dir.join("config.txt"), cfg.to_text())?;

    let reference = if cfg.reference {
        let opts = ReferenceOptions {
            tol: cfg.reference_tol,
            ..ReferenceOptions::default()
        };
        Some(reference_solution(&inst.problem, &inst.matrix, opts)?)
    } else {
        None
    };
    if cfg.audit_theorem1 && reference.is_none() {
        return Err(Error::ReferenceMissing("theorem1 audit needs reference = true"));
    }
    if cfg.audit_theorem1 && cfg.local_solver != SolverKind::Exact {
        log::warn!("the exact-case bound is only guaranteed with local_solver = exact");
    }

    let algorithms = match cfg.algorithm {
        AlgorithmChoice::Acc => vec![Algorithm::Accelerated],
        AlgorithmChoice::Baseline => vec![Algorithm::Baseline],
        AlgorithmChoice::Both => vec![Algorithm::Accelerated, Algorithm::Baseline],
    };
    let solver = solver_for(cfg, &inst, params)?;
    let mut runs = Vec::new();
    for algorithm in algorithms {
        let out = run_algorithm(cfg, &inst, algorithm, params, solver.clone(), reference.as_ref())?;
        let csv = out_dir.join(csv_name(algorithm));
        save_csv(&csv, &out.rows)?;
        let last = out.rows.last().expect("at least the initial row");
        let column = rate_column(&inst.problem, &out.rows);
        let rate = match fit_rate(&out.rows, column, tail_window(cfg.rounds)) {
            Ok(fit) => Some(fit),
            Err(Error::InsufficientData { .. }) => None,
            Err(e) => return Err(e),
        };
        let lemma2_max_error = if cfg.audit_lemma2 && algorithm == Algorithm::Accelerated {
            Some(convex_comb_audit(out.history.as_ref())?.max_reconstruction_error())
        } else {
            None
        };
        let theorem1_max_excess = match (&reference, cfg.audit_theorem1 && algorithm == Algorithm::Accelerated) {
            (Some(r), true) => {
                let max_nk = inst.partition.sizes().into_iter().max().unwrap_or(0);
                let inputs = BoundInputs {
                    matrix: &inst.matrix,
                    partition: &inst.partition,
                    gamma: params.gamma,
                    sigma_prime: params.sigma_prime,
                    smoothness: inst.problem.smoothness(),
                    alpha0: &DenseVec::zeros(inst.matrix.cols()),
                    r_cap: inst.problem.conj_lipschitz().map(|l| 2.0 * l * max_nk as f64),
                };
                let cert = theorem1_exact_audit(&out.rows, Some(&r.alpha), out.history.as_ref(), inputs)?;
                Some(cert.max_excess)
            }
            _ => None,
        };
        runs.push(AlgorithmReport {
            algorithm: algorithm.to_string(),
            csv,
            final_primal: last.primal_value,
            final_suboptimality: last.suboptimality,
            final_gap: last.duality_gap,
            rate,
            reduces: out.stats.reduces,
            broadcasts: out.stats.broadcasts,
            bytes_total: out.stats.bytes_total(),
            lemma2_max_error,
            theorem1_max_excess,
        });
    }
    let report = ExperimentReport {
        gamma: params.gamma,
        sigma_prime: params.sigma_prime,
        ref_opt: reference.map(|r| r.opt_value),
        runs,
    };
    std::fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}
