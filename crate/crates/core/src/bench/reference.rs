//! Single-machine high-accuracy solver providing `alpha*` and the optimal
//! value. Independent of the distributed code path: plain cyclic coordinate
//! descent on the full objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ColMatrix, DenseVec};
use crate::problems::{duality_gap, primal_value, ObjectivePair, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceOptions {
    /// Target for the per-coordinate one-sided stationarity residual.
    pub tol: f64,
    /// Additional duality-gap target for problems that have one.
    pub gap_tol: f64,
    pub max_sweeps: usize,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            gap_tol: 1e-10,
            max_sweeps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub alpha: DenseVec,
    pub opt_value: f64,
    pub sweeps: usize,
    pub residual: f64,
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Coordinate update and stationarity residual at gradient `g` of the
/// smooth part along coordinate `i`.
fn coord_update(p: &Problem, i: usize, a: f64, g: f64, h: f64, n: usize) -> f64 {
    match p {
        Problem::Lasso(l) => soft(a - g / h, l.lambda1 / h),
        Problem::SvmDual(s) => {
            let y = s.labels[i];
            // derivative along beta = y a is y g - 1
            let beta = (y * a - (y * g - 1.0) / h).clamp(0.0, 1.0 / n as f64);
            y * beta
        }
    }
}

fn residual(p: &Problem, i: usize, a: f64, g: f64, n: usize) -> f64 {
    match p {
        Problem::Lasso(l) => {
            if a > 0.0 {
                (g + l.lambda1).abs()
            } else if a < 0.0 {
                (g - l.lambda1).abs()
            } else {
                (g.abs() - l.lambda1).max(0.0)
            }
        }
        Problem::SvmDual(s) => {
            let y = s.labels[i];
            let beta = y * a;
            let db = y * g - 1.0;
            if beta <= 0.0 {
                (-db).max(0.0)
            } else if beta >= 1.0 / n as f64 {
                db.max(0.0)
            } else {
                db.abs()
            }
        }
    }
}

fn max_residual(p: &Problem, m: &ColMatrix, alpha: &[f64], grad_u: &[f64]) -> f64 {
    (0..alpha.len())
        .filter(|&i| m.col_norm(i) > 0.0)
        .map(|i| residual(p, i, alpha[i], m.col_dot_unchecked(i, grad_u), alpha.len()))
        .fold(0.0, f64::max)
}

pub fn reference_solution(p: &Problem, m: &ColMatrix, opts: ReferenceOptions) -> Result<ReferenceSolution> {
    reference_solution_from(p, m, &DenseVec::zeros(m.cols()), opts)
}

/// [`reference_solution`] warm-started at `alpha0`.
pub fn reference_solution_from(
    p: &Problem,
    m: &ColMatrix,
    alpha0: &[f64],
    opts: ReferenceOptions,
) -> Result<ReferenceSolution> {
    let n = m.cols();
    if alpha0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: alpha0.len(),
        });
    }
    let lf = p.smoothness();
    let mut alpha = DenseVec::from_vec(alpha0.to_vec());
    let mut u = m.mat_vec(&alpha)?;
    // both shipped f have Hessian L_f I, so grad f(u) moves along the
    // updated column
    let mut grad = p.f_grad(&u);
    let active: Vec<usize> = (0..n).filter(|&i| m.col_norm(i) > 0.0).collect();
    let mut sweeps = 0;
    let mut res = f64::INFINITY;
    // the quadratic f makes each coordinate minimization exact
    let check_every = 16;
    while sweeps < opts.max_sweeps {
        for &i in &active {
            let g = m.col_dot_unchecked(i, &grad);
            let h = lf * m.col_norm(i).powi(2);
            let new = coord_update(p, i, alpha[i], g, h, n);
            let delta = new - alpha[i];
            if delta != 0.0 {
                alpha[i] = new;
                m.add_col_to(i, delta, &mut u);
                m.add_col_to(i, lf * delta, &mut grad);
            }
        }
        sweeps += 1;
        if sweeps % check_every == 0 || sweeps == 1 {
            u = m.mat_vec(&alpha)?;
            grad = p.f_grad(&u);
            res = max_residual(p, m, &alpha, &grad);
            if !res.is_finite() {
                return Err(Error::NonFinite("reference residual"));
            }
            if res <= opts.tol && (!p.supports_gap() || duality_gap(p, m, &alpha)? <= opts.gap_tol) {
                let opt_value = primal_value(p, m, &alpha)?;
                return Ok(ReferenceSolution {
                    alpha,
                    opt_value,
                    sweeps,
                    residual: res,
                });
            }
        }
    }
    Err(Error::OracleNotConverged {
        iters: sweeps,
        residual: res,
    })
}
