//! Post-run checks against the convergence guarantees.

use serde::{Deserialize, Serialize};

use super::driver::History;
use crate::error::{Error, Result};
use crate::linalg::{sub, ColMatrix, DenseVec};
use crate::metrics::MetricsRow;
use crate::partition::Partition;

/// Weights `rho_t^l` writing `alpha_t` as a combination of `z_0..z_t`:
/// `rho_{t+1}^l = (1 - gamma theta_t) rho_t^l`, `rho_{t+1}^{t+1} = gamma theta_t`.
pub fn rho_coefficients(gamma: f64, thetas: &[f64], t: usize) -> Vec<f64> {
    let mut rho = vec![1.0];
    for &theta in &thetas[..t] {
        let keep = 1.0 - gamma * theta;
        for r in &mut rho {
            *r *= keep;
        }
        rho.push(gamma * theta);
    }
    rho
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationReport {
    /// Weights at the last recorded round.
    pub rho: Vec<f64>,
    pub min_coefficient: f64,
    /// Worst `|sum rho - 1|` over rounds.
    pub max_sum_error: f64,
    /// `||alpha_t - sum_l rho_t^l z_l||` per round.
    pub reconstruction_errors: Vec<f64>,
}

impl CombinationReport {
    pub fn max_reconstruction_error(&self) -> f64 {
        self.reconstruction_errors.iter().copied().fold(0.0, f64::max)
    }
}

pub fn convex_comb_audit(history: Option<&History>) -> Result<CombinationReport> {
    let h = history.ok_or(Error::HistoryMissing("run was not retaining history"))?;
    let rounds = h.alphas.len();
    if rounds == 0 || h.zs.len() != rounds || h.thetas.len() != rounds {
        return Err(Error::HistoryMissing("history is empty or ragged"));
    }
    let mut rho = vec![1.0];
    let mut min_coefficient = 1.0f64;
    let mut max_sum_error = 0.0f64;
    let mut errors = Vec::with_capacity(rounds);
    for t in 0..rounds {
        if t > 0 {
            let theta = h.thetas[t - 1];
            let keep = 1.0 - h.gamma * theta;
            for r in &mut rho {
                *r *= keep;
            }
            rho.push(h.gamma * theta);
        }
        min_coefficient = rho.iter().copied().fold(min_coefficient, f64::min);
        max_sum_error = max_sum_error.max((rho.iter().sum::<f64>() - 1.0).abs());
        let mut combo = DenseVec::zeros(h.alphas[t].len());
        for (r, z) in rho.iter().zip(&h.zs) {
            combo.axpy(*r, z);
        }
        errors.push(sub(&h.alphas[t], &combo).norm());
    }
    Ok(CombinationReport {
        rho,
        min_coefficient,
        max_sum_error,
        reconstruction_errors: errors,
    })
}

/// `sum_k ||A (a^[k] - b^[k])||^2`.
pub fn block_distance_sum(m: &ColMatrix, part: &Partition, a: &[f64], b: &[f64]) -> Result<f64> {
    let diff = sub(a, b);
    let mut total = 0.0;
    for block in part.blocks() {
        let mut img = DenseVec::zeros(m.rows());
        for &c in block {
            m.add_col_to(c, diff[c], &mut img);
        }
        total += img.norm_sq();
    }
    Ok(total)
}

/// Right-hand side of the exact-solve bound at round `t >= 1`:
/// `4 / (t g - g + 2)^2 * ((1 - g) initial_gap + g L sigma' C / 2)`.
pub fn exact_bound_rhs(gamma: f64, t: usize, initial_gap: f64, smoothness: f64, sigma_prime: f64, c: f64) -> f64 {
    let denom = t as f64 * gamma - gamma + 2.0;
    4.0 / (denom * denom) * ((1.0 - gamma) * initial_gap + gamma * smoothness * sigma_prime * c / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub c: f64,
    /// Largest observed `||A (alpha*^[k] - z_t^[k])||` (history runs only),
    /// capped at the worst-case value when one is known.
    pub r: Option<f64>,
    /// Indexed by `t`; `rhs[0]` is `+inf` since the bound starts at `t = 1`.
    pub rhs: Vec<f64>,
    pub lhs: Vec<f64>,
    /// `max_t (lhs_t - rhs_t)`.
    pub max_excess: f64,
}

impl BoundCertificate {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_excess <= tol
    }
}

/// Inputs of the exact-case bound that do not come from the metrics rows.
#[derive(Debug, Clone, Copy)]
pub struct BoundInputs<'a> {
    pub matrix: &'a ColMatrix,
    pub partition: &'a Partition,
    pub gamma: f64,
    pub sigma_prime: f64,
    pub smoothness: f64,
    pub alpha0: &'a [f64],
    /// Worst-case cap for `R`, if the problem provides one.
    pub r_cap: Option<f64>,
}

pub fn theorem1_exact_audit(
    rows: &[MetricsRow],
    alpha_star: Option<&[f64]>,
    history: Option<&History>,
    inputs: BoundInputs<'_>,
) -> Result<BoundCertificate> {
    let alpha_star = alpha_star.ok_or(Error::ReferenceMissing("optimal solution"))?;
    let lhs: Vec<f64> = rows
        .iter()
        .map(|r| r.suboptimality.ok_or(Error::ReferenceMissing("suboptimality column")))
        .collect::<Result<_>>()?;
    if lhs.is_empty() {
        return Err(Error::ReferenceMissing("metrics rows"));
    }
    let c = block_distance_sum(inputs.matrix, inputs.partition, alpha_star, inputs.alpha0)?;
    let initial_gap = lhs[0];
    let rhs: Vec<f64> = (0..lhs.len())
        .map(|t| {
            if t == 0 {
                f64::INFINITY
            } else {
                exact_bound_rhs(inputs.gamma, t, initial_gap, inputs.smoothness, inputs.sigma_prime, c)
            }
        })
        .collect();
    let max_excess = lhs
        .iter()
        .zip(&rhs)
        .skip(1)
        .map(|(l, r)| l - r)
        .fold(f64::NEG_INFINITY, f64::max);
    let r = match history {
        Some(h) => {
            let mut worst = 0.0f64;
            for z in h.zs.iter().skip(1) {
                for block in inputs.partition.blocks() {
                    let mut img = DenseVec::zeros(inputs.matrix.rows());
                    for &col in block {
                        inputs.matrix.add_col_to(col, alpha_star[col] - z[col], &mut img);
                    }
                    worst = worst.max(img.norm());
                }
            }
            Some(inputs.r_cap.map_or(worst, |cap| worst.min(cap)))
        }
        None => None,
    };
    Ok(BoundCertificate {
        c,
        r,
        rhs,
        lhs,
        max_excess,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationCheck {
    /// First `t` whose suboptimality is at most the target.
    pub first_t: Option<usize>,
    /// `sqrt(2 L sigma' C / eps)`.
    pub predicted: f64,
    /// `ceil(predicted) + 1`.
    pub limit: usize,
    pub passed: bool,
}

pub fn corollary1_iteration_check(
    rows: &[MetricsRow],
    epsilon: f64,
    smoothness: f64,
    sigma_prime: f64,
    c: f64,
) -> Result<IterationCheck> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("target {epsilon} must be positive")));
    }
    let mut first_t = None;
    for r in rows {
        let s = r.suboptimality.ok_or(Error::ReferenceMissing("suboptimality column"))?;
        if s <= epsilon {
            first_t = Some(r.t);
            break;
        }
    }
    let predicted = (2.0 * smoothness * sigma_prime * c / epsilon).sqrt();
    let limit = predicted.ceil() as usize + 1;
    Ok(IterationCheck {
        first_t,
        predicted,
        limit,
        passed: first_t.is_some_and(|t| t <= limit),
    })
}
