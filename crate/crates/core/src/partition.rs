//! Disjoint column partitioning across K workers, the masking operator and
//! the cross-dependency quantities that set the subproblem regularization.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, power_max_eig, ColMatrix, DenseVec};

/// Disjoint assignment of the n columns to K workers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    n: usize,
    assign: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Validates that `blocks` are disjoint, sorted and cover `[0, n)`.
    pub fn from_blocks(n: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let k = blocks.len();
        if k == 0 || k > n {
            return Err(Error::InvalidK { k, n });
        }
        let mut assign = vec![usize::MAX; n];
        for (w, block) in blocks.iter_mut().enumerate() {
            block.sort_unstable();
            for &c in block.iter() {
                if c >= n {
                    return Err(Error::IndexOutOfRange {
                        what: "column",
                        index: c,
                        bound: n,
                    });
                }
                if assign[c] != usize::MAX {
                    return Err(Error::InvalidConfig(format!(
                        "column {c} assigned to both worker {} and {w}",
                        assign[c]
                    )));
                }
                assign[c] = w;
            }
        }
        if let Some(c) = assign.iter().position(|&a| a == usize::MAX) {
            return Err(Error::InvalidConfig(format!("column {c} not assigned")));
        }
        Ok(Self { n, assign, blocks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_workers(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, k: usize) -> &[usize] {
        &self.blocks[k]
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn owner(&self, col: usize) -> usize {
        self.assign[col]
    }

    /// Writes the sidecar: a JSON array of block arrays.
    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.blocks)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path, n: usize) -> Result<Self> {
        let blocks: Vec<Vec<usize>> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_blocks(n, blocks)
    }
}

/// Shuffle the column indices with a seeded generator, then cut them into
/// K contiguous chunks whose sizes differ by at most one.
pub fn partition_balanced(n: usize, k: usize, seed: u64) -> Result<Partition> {
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, rem) = (n / k, n % k);
    let mut blocks = Vec::with_capacity(k);
    let mut start = 0;
    for w in 0..k {
        let len = base + usize::from(w < rem);
        blocks.push(order[start..start + len].to_vec());
        start += len;
    }
    Partition::from_blocks(n, blocks)
}

/// Copy of `alpha` with every entry outside block `k` zeroed.
pub fn mask(alpha: &[f64], part: &Partition, k: usize) -> Result<DenseVec> {
    if k >= part.num_workers() {
        return Err(Error::IndexOutOfRange {
            what: "worker",
            index: k,
            bound: part.num_workers(),
        });
    }
    if alpha.len() != part.n() {
        return Err(Error::DimensionMismatch {
            expected: part.n(),
            got: alpha.len(),
        });
    }
    let mut out = DenseVec::zeros(alpha.len());
    for &i in part.block(k) {
        out[i] = alpha[i];
    }
    Ok(out)
}

/// Aggregation weight `gamma` and subproblem regularization `sigma'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationParams {
    pub gamma: f64,
    pub sigma_prime: f64,
}

impl AggregationParams {
    pub fn new(gamma: f64, sigma_prime: f64, k: usize) -> Result<Self> {
        check_gamma(gamma, k)?;
        if !(sigma_prime >= 0.0 && sigma_prime.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma' = {sigma_prime} must be >= 0")));
        }
        Ok(Self { gamma, sigma_prime })
    }

    /// `gamma` with the safe `sigma' = gamma K`.
    pub fn safe(gamma: f64, k: usize) -> Result<Self> {
        Ok(Self {
            gamma,
            sigma_prime: safe_sigma_prime(gamma, k)?,
        })
    }
}

fn check_gamma(gamma: f64, k: usize) -> Result<()> {
    let lo = 1.0 / k as f64;
    // tolerate the rounding in 1/K passed through text configs
    if k == 0 || !(gamma >= lo * (1.0 - 1e-12) && gamma <= 1.0) {
        return Err(Error::InvalidGamma { gamma, k });
    }
    Ok(())
}

/// `sigma' = gamma K`, which always satisfies the cross-dependency bound.
pub fn safe_sigma_prime(gamma: f64, k: usize) -> Result<f64> {
    check_gamma(gamma, k)?;
    Ok(gamma * k as f64)
}

/// Inflation applied to an estimated `sigma'_min` before it is used.
pub const SIGMA_SAFETY_FACTOR: f64 = 1.05;

/// Orthonormal basis (as dense d-vectors) of the span of the given
/// columns; modified Gram-Schmidt with reorthogonalization.
fn block_basis(m: &ColMatrix, cols: &[usize]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for &c in cols {
        let nrm0 = m.col_norm(c);
        if nrm0 == 0.0 {
            continue;
        }
        let mut v = m.column_dense(c).into_vec();
        for _ in 0..2 {
            for q in &basis {
                let p = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= p * qi);
            }
        }
        let nrm = dot(&v, &v).sqrt();
        if nrm > 1e-10 * nrm0 {
            v.iter_mut().for_each(|x| *x /= nrm);
            basis.push(v);
        }
    }
    basis
}

/// Estimate of `sigma'_min = gamma * max_a ||A a||^2 / sum_k ||A a^[k]||^2`.
///
/// The ratio's maximum equals the top eigenvalue of `sum_k P_k`, where
/// `P_k` projects onto the column space of block k. This is the generalized
/// eigenproblem `A^T A x = mu B x` (B the block-diagonal Gram) restricted
/// to the range of B, so directions where every `A a^[k]` vanishes are
/// excluded. The result is clamped into `[gamma, gamma K]`.
pub fn estimate_sigma_prime_min(
    m: &ColMatrix,
    part: &Partition,
    gamma: f64,
    iters: usize,
    seed: u64,
) -> Result<f64> {
    let k = part.num_workers();
    check_gamma(gamma, k)?;
    if m.cols() != part.n() {
        return Err(Error::DimensionMismatch {
            expected: part.n(),
            got: m.cols(),
        });
    }
    if k == 1 {
        return Ok(gamma);
    }
    let bases: Vec<Vec<Vec<f64>>> = part.blocks().iter().map(|b| block_basis(m, b)).collect();
    if bases.iter().all(Vec::is_empty) {
        return Err(Error::SingularBlock(0));
    }
    let ratio = power_max_eig(
        m.rows(),
        |x, y| {
            y.iter_mut().for_each(|v| *v = 0.0);
            for basis in &bases {
                for q in basis {
                    let p = dot(q, x);
                    y.iter_mut().zip(q).for_each(|(yi, qi)| *yi += p * qi);
                }
            }
        },
        iters,
        1e-12,
        seed,
    )?;
    Ok(gamma * ratio.clamp(1.0, k as f64))
}

/// `sigma'` derived from an estimate: inflated by the safety factor and
/// never above the safe value. Falls back to the safe value on failure.
pub fn estimated_sigma_prime(m: &ColMatrix, part: &Partition, gamma: f64, seed: u64) -> Result<f64> {
    let safe = safe_sigma_prime(gamma, part.num_workers())?;
    match estimate_sigma_prime_min(m, part, gamma, 2000, seed) {
        Ok(est) => Ok((est * SIGMA_SAFETY_FACTOR).min(safe)),
        Err(e) => {
            log::warn!("sigma' estimate failed ({e}); using safe value {safe}");
            Ok(safe)
        }
    }
}

/// Spectral quantities used to compare partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Quantities {
    /// `max ||A a||^2 / ||a||^2`
    pub sigma_tilde_sq: f64,
    /// Local analogue per block.
    pub sigma_k_sq: Vec<f64>,
    /// `sum_k n_k sigma_k^2`
    pub sigma_sq: f64,
}

pub fn table1_quantities(m: &ColMatrix, part: &Partition) -> Result<Table1Quantities> {
    const ITERS: usize = 5000;
    const TOL: f64 = 1e-12;
    let sigma_tilde_sq = m.gram_max_eig(ITERS, TOL, 11)?;
    let mut sigma_k_sq = Vec::with_capacity(part.num_workers());
    let mut tmp = DenseVec::zeros(m.rows());
    for block in part.blocks() {
        let s = power_max_eig(
            block.len(),
            |x, y| {
                tmp.iter_mut().for_each(|v| *v = 0.0);
                for (&c, &xi) in block.iter().zip(x) {
                    m.add_col_to(c, xi, &mut tmp);
                }
                for (yi, &c) in y.iter_mut().zip(block) {
                    *yi = m.col_dot_unchecked(c, &tmp);
                }
            },
            ITERS,
            TOL,
            13,
        )?;
        sigma_k_sq.push(s);
    }
    let sigma_sq = sigma_k_sq
        .iter()
        .zip(part.blocks())
        .map(|(s, b)| s * b.len() as f64)
        .sum();
    Ok(Table1Quantities {
        sigma_tilde_sq,
        sigma_k_sq,
        sigma_sq,
    })
}
