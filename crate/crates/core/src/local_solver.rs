//! Local subproblem construction and its approximate solution by
//! randomized exact coordinate minimization (SDCA).
//!
//! On worker k the subproblem over the local block `z` is
//!
//! ```text
//! G_k(z) = psi_k(z) + f(A y)/K + w^T A (z - y) + (q/2) ||A (z - z_start)||^2
//! ```
//!
//! with `w = grad f(A y)` and `q = L_f * theta * sigma'`. A solver only
//! ever sees a [`SubproblemView`], which carries the shared vector `w`, the
//! worker's own slices and its own columns; nothing global.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, ColMatrix, DenseVec};
use crate::problems::ObjectivePair;

/// The columns of one block, addressed by local index.
#[derive(Debug, Clone, Copy)]
pub struct LocalColumns<'a> {
    matrix: &'a ColMatrix,
    cols: &'a [usize],
}

impl<'a> LocalColumns<'a> {
    pub fn new(matrix: &'a ColMatrix, cols: &'a [usize]) -> Self {
        Self { matrix, cols }
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Global column index of local coordinate `j`.
    pub fn global(&self, j: usize) -> usize {
        self.cols[j]
    }

    pub fn norm_sq(&self, j: usize) -> f64 {
        let n = self.matrix.col_norm(self.cols[j]);
        n * n
    }

    pub fn col_dot(&self, j: usize, w: &[f64]) -> f64 {
        self.matrix.col_dot_unchecked(self.cols[j], w)
    }

    pub fn add_col_to(&self, j: usize, a: f64, out: &mut [f64]) {
        self.matrix.add_col_to(self.cols[j], a, out);
    }

    /// `A v` for a local vector `v`.
    pub fn image(&self, v: &[f64]) -> DenseVec {
        let mut out = DenseVec::zeros(self.dim());
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                self.add_col_to(j, vj, &mut out);
            }
        }
        out
    }
}

/// Everything a worker needs to build and solve its subproblem.
#[derive(Clone, Copy)]
pub struct SubproblemView<'a, P: ?Sized> {
    pub problem: &'a P,
    pub cols: LocalColumns<'a>,
    /// Shared vector `grad f(A y_t)`.
    pub w: &'a [f64],
    pub y_block: &'a [f64],
    pub z_start: &'a [f64],
    pub theta: f64,
    pub sigma_prime: f64,
    pub smoothness: f64,
    /// `f(A y_t) / K`; a constant that does not move the minimizer.
    pub f_over_k: f64,
}

impl<'a, P: ObjectivePair + ?Sized> SubproblemView<'a, P> {
    /// Coefficient `q = L_f theta sigma'` of the quadratic term.
    pub fn quad_coef(&self) -> f64 {
        self.smoothness * self.theta * self.sigma_prime
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        let nk = self.cols.len();
        for len in [z.len(), self.y_block.len(), self.z_start.len()] {
            if len != nk {
                return Err(Error::DimensionMismatch {
                    expected: nk,
                    got: len,
                });
            }
        }
        if self.w.len() != self.cols.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.cols.dim(),
                got: self.w.len(),
            });
        }
        Ok(())
    }

    fn psi(&self, z: &[f64]) -> f64 {
        z.iter()
            .enumerate()
            .map(|(j, &v)| self.problem.g_value(self.cols.global(j), v))
            .sum()
    }

    /// Coordinate objective pieces `(grad_j, h_j)` at residual `u = A(z - z_start)`.
    fn coord_model(&self, u: &[f64], j: usize) -> (f64, f64) {
        let q = self.quad_coef();
        let grad = self.cols.col_dot(j, self.w) + q * self.cols.col_dot(j, u);
        (grad, q * self.cols.norm_sq(j))
    }
}

/// Value of `G_k` at the candidate block `z`.
pub fn subproblem_value<P: ObjectivePair + ?Sized>(view: &SubproblemView<'_, P>, z: &[f64]) -> Result<f64> {
    view.check(z)?;
    let psi = view.psi(z);
    if psi.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let lin = view.cols.image(&crate::linalg::sub(z, view.y_block));
    let quad = view.cols.image(&crate::linalg::sub(z, view.z_start));
    Ok(psi + view.f_over_k + dot(view.w, &lin) + 0.5 * view.quad_coef() * dot(&quad, &quad))
}

/// `G_k(z1) - G_k(z2)` without forming either value, so the shared
/// constant terms cancel exactly.
pub fn subproblem_difference<P: ObjectivePair + ?Sized>(
    view: &SubproblemView<'_, P>,
    z1: &[f64],
    z2: &[f64],
) -> Result<f64> {
    view.check(z1)?;
    view.check(z2)?;
    let psi1 = view.psi(z1);
    let psi2 = view.psi(z2);
    if psi1.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let u1 = view.cols.image(&crate::linalg::sub(z1, view.z_start));
    let u2 = view.cols.image(&crate::linalg::sub(z2, view.z_start));
    let du = crate::linalg::sub(&u1, &u2);
    let su: DenseVec = u1.iter().zip(u2.iter()).map(|(a, b)| a + b).collect();
    Ok((psi1 - psi2) + dot(view.w, &du) + 0.5 * view.quad_coef() * dot(&du, &su))
}

/// Exact minimizer over coordinate `j` with the rest of the block fixed.
///
/// `u` is the running residual `A(z_cur - z_start)` and `z_j` the current
/// value of the coordinate.
pub fn coord_exact_min<P: ObjectivePair + ?Sized>(
    view: &SubproblemView<'_, P>,
    u: &[f64],
    z_j: f64,
    j: usize,
) -> Result<f64> {
    let (grad, h) = view.coord_model(u, j);
    let i = view.cols.global(j);
    if h > 0.0 {
        return Ok(view.problem.coord_prox(i, z_j - grad / h, h));
    }
    // Linear model only: stationary iff no feasible direction descends.
    let up = view.problem.g_dir_deriv(i, z_j, 1.0) + grad;
    let down = view.problem.g_dir_deriv(i, z_j, -1.0) - grad;
    if up >= 0.0 && down >= 0.0 {
        Ok(z_j)
    } else {
        Err(Error::ZeroCurvature(i))
    }
}

/// Output of a local solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolveResult {
    pub z_block_new: DenseVec,
    /// `A (z_new - z_start)` over the local block.
    pub delta_image: DenseVec,
    pub inner_iters_used: usize,
    pub final_gk: f64,
}

fn require_curvature<P: ObjectivePair + ?Sized>(view: &SubproblemView<'_, P>) -> Result<()> {
    let q = view.quad_coef();
    if !(q > 0.0 && q.is_finite()) {
        // theta = 0 (or sigma' = 0) leaves no curvature to work with
        return Err(Error::ZeroCurvature(usize::MAX));
    }
    Ok(())
}

/// SDCA: `h` uniformly random picks (with replacement) from the block,
/// each applying [`coord_exact_min`]. Zero columns are skipped.
pub fn sdca_solve<P, R>(view: &SubproblemView<'_, P>, h: usize, rng: &mut R) -> Result<LocalSolveResult>
where
    P: ObjectivePair + ?Sized,
    R: Rng + ?Sized,
{
    sdca_solve_traced(view, h, rng, |_, _| {})
}

/// [`sdca_solve`] with a hook called after every inner step with the
/// current block and residual.
pub fn sdca_solve_traced<P, R, F>(
    view: &SubproblemView<'_, P>,
    h: usize,
    rng: &mut R,
    mut on_step: F,
) -> Result<LocalSolveResult>
where
    P: ObjectivePair + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(&[f64], &[f64]),
{
    view.check(view.z_start)?;
    let mut z = DenseVec::from_vec(view.z_start.to_vec());
    let mut u = DenseVec::zeros(view.cols.dim());
    let nk = view.cols.len();
    if h > 0 && nk > 0 {
        require_curvature(view)?;
        for _ in 0..h {
            let j = rng.random_range(0..nk);
            if view.cols.norm_sq(j) == 0.0 {
                continue;
            }
            let new = coord_exact_min(view, &u, z[j], j)?;
            let delta = new - z[j];
            if delta != 0.0 {
                z[j] = new;
                view.cols.add_col_to(j, delta, &mut u);
            }
            on_step(&z, &u);
        }
    }
    let final_gk = subproblem_value(view, &z)?;
    Ok(LocalSolveResult {
        z_block_new: z,
        delta_image: u,
        inner_iters_used: h,
        final_gk,
    })
}

/// Settings for the deterministic high-accuracy solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSolveOptions {
    /// Stop once a full sweep moves no coordinate by more than
    /// `tol * max(1, |z_j|)`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for ExactSolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_sweeps: 200_000,
        }
    }
}

/// Cyclic coordinate descent on `G_k` to per-coordinate stationarity.
/// Stands in for an exact subproblem solve.
pub fn exact_solve<P: ObjectivePair + ?Sized>(
    view: &SubproblemView<'_, P>,
    opts: ExactSolveOptions,
) -> Result<LocalSolveResult> {
    exact_solve_from(view, view.z_start, opts)
}

/// [`exact_solve`] warm-started at `z0`.
pub fn exact_solve_from<P: ObjectivePair + ?Sized>(
    view: &SubproblemView<'_, P>,
    z0: &[f64],
    opts: ExactSolveOptions,
) -> Result<LocalSolveResult> {
    view.check(z0)?;
    require_curvature(view)?;
    let nk = view.cols.len();
    let mut z = DenseVec::from_vec(z0.to_vec());
    let mut u = view.cols.image(&crate::linalg::sub(z0, view.z_start));
    let active: Vec<usize> = (0..nk).filter(|&j| view.cols.norm_sq(j) > 0.0).collect();
    let mut sweeps = 0;
    let mut last_move = f64::INFINITY;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut max_move: f64 = 0.0;
        for &j in &active {
            let new = coord_exact_min(view, &u, z[j], j)?;
            let delta = new - z[j];
            if delta != 0.0 {
                max_move = max_move.max(delta.abs() / z[j].abs().max(1.0));
                z[j] = new;
                view.cols.add_col_to(j, delta, &mut u);
            }
        }
        last_move = max_move;
        if max_move <= opts.tol {
            break;
        }
        if sweeps % 64 == 0 {
            // re-derive the residual to keep incremental drift out
            u = view.cols.image(&crate::linalg::sub(&z, view.z_start));
        }
    }
    if last_move > opts.tol {
        return Err(Error::OracleNotConverged {
            iters: sweeps,
            residual: last_move,
        });
    }
    let delta_image = view.cols.image(&crate::linalg::sub(&z, view.z_start));
    let final_gk = subproblem_value(view, &z)?;
    Ok(LocalSolveResult {
        z_block_new: z,
        delta_image,
        inner_iters_used: sweeps * active.len(),
        final_gk,
    })
}

/// Realized subproblem suboptimality `G_k(result) - G_k(z*)`, with `z*`
/// from the high-accuracy oracle. Intended for small blocks in test mode.
pub fn measure_eps<P: ObjectivePair + ?Sized>(
    view: &SubproblemView<'_, P>,
    result: &LocalSolveResult,
) -> Result<f64> {
    let oracle = exact_solve(view, ExactSolveOptions::default())?;
    measure_eps_against(view, result, &oracle)
}

/// [`measure_eps`] against an oracle solution computed once.
pub fn measure_eps_against<P: ObjectivePair + ?Sized>(
    view: &SubproblemView<'_, P>,
    result: &LocalSolveResult,
    oracle: &LocalSolveResult,
) -> Result<f64> {
    subproblem_difference(view, &result.z_block_new, &oracle.z_block_new)
}
