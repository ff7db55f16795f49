//! The outer loop: accelerated CoCoA+ and the plain CoCoA+ baseline.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::schedule::{BudgetTable, EpsSchedule};
use super::theta::ThetaSequence;
use crate::cluster::{Cluster, CommStats, Transport};
use crate::error::{Error, Result};
use crate::linalg::{ColMatrix, DenseVec};
use crate::local_solver::{
    exact_solve, measure_eps_against, sdca_solve, ExactSolveOptions, LocalSolveResult, SubproblemView,
};
use crate::metrics::MetricsRow;
use crate::partition::{AggregationParams, Partition};
use crate::problems::{gap_at, primal_value_at, ObjectivePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    Accelerated,
    Baseline,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "acc" => Ok(Self::Accelerated),
            "baseline" => Ok(Self::Baseline),
            other => Err(Error::InvalidConfig(format!("unknown algorithm {other:?}"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Accelerated => "acc",
            Self::Baseline => "baseline",
        })
    }
}

/// How each worker attacks its subproblem.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerSolver {
    /// A fixed number of SDCA steps per round.
    Sdca { h: usize },
    /// Cyclic coordinate descent to stationarity.
    Exact(ExactSolveOptions),
    /// Per-round SDCA budget looked up from `a_t`; rounds whose target is
    /// beyond the table fall back to the exact solve.
    Scheduled { schedule: EpsSchedule, table: BudgetTable },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Plan {
    Sdca(usize),
    Exact(ExactSolveOptions),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriverOptions {
    pub algorithm: Algorithm,
    pub params: AggregationParams,
    pub solver: InnerSolver,
    pub transport: Transport,
    pub seed: u64,
    /// Keep every `alpha_t` and `z_t` (small runs only).
    pub keep_history: bool,
    /// Measure the realized subproblem accuracy every this many rounds.
    pub measure_eps_every: Option<usize>,
    /// Test-mode calibration: besides the real solve, run SDCA with each of
    /// these budgets on every subproblem and record `eps / theta`.
    pub probe_grid: Option<Vec<usize>>,
    pub ref_opt: Option<f64>,
    pub wall_clock: bool,
}

impl DriverOptions {
    pub fn new(algorithm: Algorithm, params: AggregationParams, solver: InnerSolver) -> Self {
        Self {
            algorithm,
            params,
            solver,
            transport: Transport::InProcess,
            seed: 0,
            keep_history: false,
            measure_eps_every: None,
            probe_grid: None,
            ref_opt: None,
            wall_clock: true,
        }
    }
}

/// Coordinator-side round state. Block slices of `alpha`, `z`, `y` live on
/// the workers.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundState {
    pub theta: ThetaSequence,
    pub params: AggregationParams,
    /// `A y_t`, the reduced vector of the last round.
    pub ay: DenseVec,
    /// `grad f(A y_t)`, the broadcast vector of the last round.
    pub w: DenseVec,
}

/// Full iterate trace, retained in test mode.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub gamma: f64,
    /// `theta_t` for every recorded `t`.
    pub thetas: Vec<f64>,
    pub alphas: Vec<DenseVec>,
    pub zs: Vec<DenseVec>,
}

#[derive(Debug, Clone, PartialEq)]
struct WorkerReport {
    eps: Option<f64>,
    probes: Vec<f64>,
}

/// Drives one algorithm over a cluster, one round per [`Driver::step`].
pub struct Driver<'a, P: ObjectivePair + ?Sized> {
    problem: &'a P,
    matrix: Arc<ColMatrix>,
    cluster: Cluster,
    opts: DriverOptions,
    state: RoundState,
    t: usize,
    history: Option<History>,
    probe_samples: Vec<Vec<f64>>,
    rows: Vec<MetricsRow>,
    started: Instant,
}

/// Everything a finished run leaves behind.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub rows: Vec<MetricsRow>,
    pub alpha: DenseVec,
    pub stats: CommStats,
    pub history: Option<History>,
    pub probe_samples: Vec<Vec<f64>>,
}

impl<'a, P: ObjectivePair + ?Sized> Driver<'a, P> {
    /// Spawns the cluster and records the `t = 0` row. `alpha0` defaults to
    /// zero; `z_0 = y_0 = alpha_0`.
    pub fn new(
        problem: &'a P,
        matrix: Arc<ColMatrix>,
        partition: &Partition,
        opts: DriverOptions,
        alpha0: Option<&[f64]>,
    ) -> Result<Self> {
        let n = matrix.cols();
        if let Some(expected) = problem.num_coords() {
            if expected != n {
                return Err(Error::DimensionMismatch { expected, got: n });
            }
        }
        let k = partition.num_workers();
        AggregationParams::new(opts.params.gamma, opts.params.sigma_prime, k)?;
        if opts.params.sigma_prime <= 0.0 {
            return Err(Error::InvalidConfig("sigma' must be positive".into()));
        }
        let mut cluster = Cluster::spawn(partition, Arc::clone(&matrix), opts.transport, opts.seed)?;
        if let Some(a0) = alpha0 {
            if a0.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: a0.len(),
                });
            }
            for w in cluster.workers_mut() {
                let slice: DenseVec = w.block().iter().map(|&c| a0[c]).collect();
                w.state.alpha = slice.clone();
                w.state.z = slice.clone();
                w.state.y = slice;
            }
        }
        let theta = ThetaSequence::new(opts.params.gamma)?;
        let d = matrix.rows();
        let history = opts.keep_history.then(|| History {
            gamma: opts.params.gamma,
            ..History::default()
        });
        let probe_samples = vec![Vec::new(); opts.probe_grid.as_ref().map_or(0, Vec::len)];
        let mut driver = Self {
            problem,
            matrix,
            cluster,
            state: RoundState {
                theta,
                params: opts.params,
                ay: DenseVec::zeros(d),
                w: DenseVec::zeros(d),
            },
            opts,
            t: 0,
            history,
            probe_samples,
            rows: Vec::new(),
            started: Instant::now(),
        };
        driver.record(None)?;
        Ok(driver)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn state(&self) -> &RoundState {
        &self.state
    }

    pub fn rows(&self) -> &[MetricsRow] {
        &self.rows
    }

    pub fn stats(&self) -> CommStats {
        self.cluster.stats()
    }

    pub fn cluster(&self) -> &Cluster {
        &self.cluster
    }

    pub fn history(&self) -> Option<&History> {
        self.history.as_ref()
    }

    pub fn alpha(&self) -> DenseVec {
        self.cluster.gather(self.matrix.cols(), |w| &w.state.alpha)
    }

    pub fn z(&self) -> DenseVec {
        self.cluster.gather(self.matrix.cols(), |w| &w.state.z)
    }

    /// Runs one outer round of the configured algorithm.
    pub fn step(&mut self) -> Result<&MetricsRow> {
        match self.opts.algorithm {
            Algorithm::Accelerated => self.acc_step(),
            Algorithm::Baseline => self.cocoa_plus_step(),
        }
    }

    pub fn run(&mut self, rounds: usize) -> Result<()> {
        for _ in 0..rounds {
            self.step()?;
        }
        Ok(())
    }

    pub fn finish(self) -> RunOutput {
        RunOutput {
            alpha: self.alpha(),
            rows: self.rows,
            stats: self.cluster.stats(),
            history: self.history,
            probe_samples: self.probe_samples,
        }
    }

    /// `y = (1 - g th) alpha + g th z`; reduce `A y`; broadcast
    /// `w = grad f(A y)`; local solves; `alpha = y + g th (z_new - z)`;
    /// advance theta.
    pub fn acc_step(&mut self) -> Result<&MetricsRow> {
        let theta = self.state.theta.current();
        let eps = self.round(true, theta)?;
        self.state.theta.advance();
        self.record(eps)
    }

    /// The baseline: subproblem at `y = z = alpha` with theta frozen at 1,
    /// then `alpha += gamma (z_new - alpha)`.
    pub fn cocoa_plus_step(&mut self) -> Result<&MetricsRow> {
        let eps = self.round(false, 1.0)?;
        self.record(eps)
    }

    fn plan(&self) -> Plan {
        match &self.opts.solver {
            InnerSolver::Sdca { h } => Plan::Sdca(*h),
            InnerSolver::Exact(o) => Plan::Exact(*o),
            InnerSolver::Scheduled { schedule, table } => match table.budget_for(schedule.a(self.t)) {
                Some(h) => Plan::Sdca(h),
                None => Plan::Exact(ExactSolveOptions::default()),
            },
        }
    }

    fn round(&mut self, accelerated: bool, theta: f64) -> Result<Option<f64>> {
        let gamma = self.state.params.gamma;
        let gt = gamma * theta;

        let images = self.cluster.run_round(|wk| {
            let st = &mut wk.state;
            if accelerated {
                for i in 0..st.alpha.len() {
                    st.y[i] = (1.0 - gt) * st.alpha[i] + gt * st.z[i];
                }
            } else {
                st.y.copy_from_slice(&st.alpha);
                st.z.copy_from_slice(&st.alpha);
            }
            wk.columns().image(&wk.state.y)
        })?;
        let ay = self.cluster.all_reduce_sum(images)?;
        if !ay.is_finite() {
            return Err(Error::NonFinite("A y"));
        }
        let w = self.problem.f_grad(&ay);
        let f_y = self.problem.f_value(&ay);
        if !w.is_finite() || !f_y.is_finite() {
            return Err(Error::NonFinite("f at A y"));
        }
        self.cluster.broadcast(&w)?;
        self.state.ay = ay;
        self.state.w = w;

        let plan = self.plan();
        let t = self.t;
        let measure = self.opts.measure_eps_every.is_some_and(|e| e > 0 && t.is_multiple_of(e));
        let probe_grid = self.opts.probe_grid.as_deref();
        let problem = self.problem;
        let sigma_prime = self.state.params.sigma_prime;
        let smoothness = problem.smoothness();
        let f_over_k = f_y / self.cluster.num_workers() as f64;

        let reports = self.cluster.run_round(|wk| -> Result<WorkerReport> {
            let (result, report) = {
                let w = wk
                    .shared_w()
                    .ok_or_else(|| Error::RoundMismatch(format!("worker {} missed the broadcast", wk.id())))?;
                let view = SubproblemView {
                    problem,
                    cols: wk.columns(),
                    w,
                    y_block: &wk.state.y,
                    z_start: &wk.state.z,
                    theta,
                    sigma_prime,
                    smoothness,
                    f_over_k,
                };
                let result = match plan {
                    Plan::Sdca(h) => sdca_solve(&view, h, &mut wk.rng_for_round(t as u64))?,
                    Plan::Exact(o) => exact_solve(&view, o)?,
                };
                let mut oracle: Option<LocalSolveResult> = None;
                let mut oracle_for = |view: &SubproblemView<'_, P>| -> Result<LocalSolveResult> {
                    if let Some(o) = &oracle {
                        return Ok(o.clone());
                    }
                    let o = exact_solve(view, ExactSolveOptions::default())?;
                    oracle = Some(o.clone());
                    Ok(o)
                };
                let eps = if measure {
                    let o = oracle_for(&view)?;
                    Some(measure_eps_against(&view, &result, &o)?)
                } else {
                    None
                };
                let mut probes = Vec::new();
                if let Some(grid) = probe_grid {
                    let o = oracle_for(&view)?;
                    for &h in grid {
                        let r = sdca_solve(&view, h, &mut wk.rng_for_round(t as u64))?;
                        probes.push(measure_eps_against(&view, &r, &o)? / theta);
                    }
                }
                (result, WorkerReport { eps, probes })
            };
            let st = &mut wk.state;
            let z_new = result.z_block_new;
            if accelerated {
                for i in 0..st.alpha.len() {
                    st.alpha[i] = st.y[i] + gt * (z_new[i] - st.z[i]);
                }
                st.z = z_new;
            } else {
                for i in 0..st.alpha.len() {
                    st.alpha[i] += gamma * (z_new[i] - st.alpha[i]);
                }
                st.z.copy_from_slice(&st.alpha);
                st.y.copy_from_slice(&st.alpha);
            }
            Ok(report)
        })?;

        let mut eps: Option<f64> = None;
        for r in reports {
            let r = r?;
            if let Some(e) = r.eps {
                eps = Some(eps.map_or(e, |m: f64| m.max(e)));
            }
            for (slot, v) in self.probe_samples.iter_mut().zip(r.probes) {
                slot.push(v);
            }
        }
        self.t += 1;
        Ok(eps)
    }

    /// Appends the metrics row (and history entry) for the current `t`.
    fn record(&mut self, eps_measured: Option<f64>) -> Result<&MetricsRow> {
        let alpha = self.alpha();
        let a_alpha = self.matrix.mat_vec(&alpha)?;
        let primal = primal_value_at(self.problem, &a_alpha, &alpha);
        if primal.is_nan() {
            return Err(Error::NonFinite("primal value"));
        }
        let duality_gap = if self.problem.supports_gap() {
            Some(gap_at(self.problem, &self.matrix, &a_alpha, &alpha)?)
        } else {
            None
        };
        let accelerated = self.opts.algorithm == Algorithm::Accelerated;
        let stats = self.cluster.stats();
        let theta = self.state.theta.current();
        if let Some(h) = self.history.as_mut() {
            h.thetas.push(theta);
            h.zs.push(self.cluster.gather(alpha.len(), |w| &w.state.z));
            h.alphas.push(alpha);
        }
        self.rows.push(MetricsRow {
            t: self.t,
            wall_seconds: if self.opts.wall_clock {
                self.started.elapsed().as_secs_f64()
            } else {
                0.0
            },
            primal_value: primal,
            suboptimality: self.opts.ref_opt.map(|r| primal - r),
            duality_gap,
            theta: accelerated.then_some(theta),
            reduces: stats.reduces,
            broadcasts: stats.broadcasts,
            bytes_total: stats.bytes_total(),
            eps_measured,
        });
        Ok(self.rows.last().expect("row just pushed"))
    }
}

/// Builds a driver, runs `rounds` rounds and returns the outputs.
pub fn run<P: ObjectivePair + ?Sized>(
    problem: &P,
    matrix: Arc<ColMatrix>,
    partition: &Partition,
    opts: DriverOptions,
    alpha0: Option<&[f64]>,
    rounds: usize,
) -> Result<RunOutput> {
    let mut d = Driver::new(problem, matrix, partition, opts, alpha0)?;
    d.run(rounds)?;
    Ok(d.finish())
}

/// Runs an exact-solve pilot of the accelerated method and tabulates, for
/// each budget in `grid`, the worst `eps / theta` SDCA reached on the
/// pilot's subproblems (same random streams a real run would use).
pub fn calibrate_budgets<P: ObjectivePair + ?Sized>(
    problem: &P,
    matrix: Arc<ColMatrix>,
    partition: &Partition,
    params: AggregationParams,
    seed: u64,
    grid: Vec<usize>,
    rounds: usize,
) -> Result<BudgetTable> {
    let mut opts = DriverOptions::new(
        Algorithm::Accelerated,
        params,
        InnerSolver::Exact(ExactSolveOptions::default()),
    );
    opts.seed = seed;
    opts.wall_clock = false;
    opts.probe_grid = Some(grid.clone());
    let out = run(problem, matrix, partition, opts, None, rounds)?;
    BudgetTable::from_samples(grid, &out.probe_samples)
}
