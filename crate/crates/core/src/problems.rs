//! Primal/dual objective pairs.
//!
//! The primal problem is `min_a f(A a) + sum_i g_i(a_i)` and the dual is
//! `min_w f*(w) + sum_i g_i*(-A_i^T w)`, linked by the dual map
//! `w(a) = grad f(A a)`.

use crate::error::{Error, Result};
use crate::linalg::{ColMatrix, DenseVec};

/// A problem instance: smooth data term `f`, separable `g_i` and their
/// conjugates.
///
/// Coordinate indices passed to `g_*` methods are global column indices.
pub trait ObjectivePair: Send + Sync {
    fn f_value(&self, u: &[f64]) -> f64;
    fn f_grad(&self, u: &[f64]) -> DenseVec;
    /// Lipschitz constant of `grad f`.
    fn smoothness(&self) -> f64;
    /// `f*(w)`.
    fn f_conj_value(&self, w: &[f64]) -> f64;

    /// `g_i(a)`, `+inf` outside the domain.
    fn g_value(&self, i: usize, a: f64) -> f64;
    /// `g_i*(s)`, `+inf` where the conjugate is an indicator and `s` lies
    /// outside its support.
    fn g_conj_value(&self, i: usize, s: f64) -> f64;
    /// Lipschitz constant shared by every `g_i*`, if finite.
    fn conj_lipschitz(&self) -> Option<f64>;

    /// Exact minimizer over `z` of `g_i(z) + (h/2)(z - v)^2`, `h > 0`.
    fn coord_prox(&self, i: usize, v: f64, h: f64) -> f64;
    /// One-sided directional derivative of `g_i` at `a` along `dir = +-1`
    /// (`+inf` when the step leaves the domain).
    fn g_dir_deriv(&self, i: usize, a: f64, dir: f64) -> f64;

    fn supports_gap(&self) -> bool;
    /// Expected column count, when the instance is tied to one.
    fn num_coords(&self) -> Option<usize>;
}

/// `f(u) = 0.5 ||u - b||^2`, `g_i(a) = lambda1 |a|`.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoInstance {
    pub b: DenseVec,
    pub lambda1: f64,
}

impl LassoInstance {
    pub fn new(b: DenseVec, lambda1: f64) -> Result<Self> {
        if !(lambda1 > 0.0 && lambda1.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda1 must be > 0, got {lambda1}")));
        }
        Ok(Self { b, lambda1 })
    }
}

impl ObjectivePair for LassoInstance {
    fn f_value(&self, u: &[f64]) -> f64 {
        0.5 * u
            .iter()
            .zip(self.b.iter())
            .map(|(x, b)| (x - b) * (x - b))
            .sum::<f64>()
    }

    fn f_grad(&self, u: &[f64]) -> DenseVec {
        u.iter().zip(self.b.iter()).map(|(x, b)| x - b).collect()
    }

    fn smoothness(&self) -> f64 {
        1.0
    }

    fn f_conj_value(&self, w: &[f64]) -> f64 {
        // sup_u w.u - 0.5||u - b||^2 attained at u = b + w
        0.5 * crate::linalg::dot(w, w) + crate::linalg::dot(w, &self.b)
    }

    fn g_value(&self, _i: usize, a: f64) -> f64 {
        self.lambda1 * a.abs()
    }

    fn g_conj_value(&self, _i: usize, s: f64) -> f64 {
        if s.abs() <= self.lambda1 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn conj_lipschitz(&self) -> Option<f64> {
        None
    }

    fn coord_prox(&self, _i: usize, v: f64, h: f64) -> f64 {
        soft_threshold(v, self.lambda1 / h)
    }

    fn g_dir_deriv(&self, _i: usize, a: f64, dir: f64) -> f64 {
        if a == 0.0 {
            self.lambda1
        } else {
            self.lambda1 * a.signum() * dir
        }
    }

    fn supports_gap(&self) -> bool {
        false
    }

    fn num_coords(&self) -> Option<usize> {
        None
    }
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Hinge-loss SVM written in the primal/dual form.
///
/// `f(u) = ||u||^2 / (2 lambda)`, `g_i(a) = -y_i a` on `y_i a in [0, 1/n]`;
/// the dual objective is then exactly the regularized hinge-loss risk
/// `(lambda/2)||w||^2 + (1/n) sum_i max(0, 1 - y_i A_i^T w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeSvmDualInstance {
    pub labels: Vec<f64>,
    pub lambda_reg: f64,
}

impl HingeSvmDualInstance {
    pub fn new(labels: Vec<f64>, lambda_reg: f64) -> Result<Self> {
        if !(lambda_reg > 0.0 && lambda_reg.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda_reg must be > 0, got {lambda_reg}"
            )));
        }
        if labels.is_empty() {
            return Err(Error::InvalidConfig("SVM needs at least one label".into()));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidConfig(format!("label {bad} not in {{-1, +1}}")));
        }
        Ok(Self { labels, lambda_reg })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    fn upper(&self) -> f64 {
        1.0 / self.labels.len() as f64
    }

    /// Slack on the box edges so iterates built by convex combination do
    /// not fall out of the domain through rounding.
    fn slack(&self) -> f64 {
        1e-12 * self.upper()
    }
}

impl ObjectivePair for HingeSvmDualInstance {
    fn f_value(&self, u: &[f64]) -> f64 {
        crate::linalg::dot(u, u) / (2.0 * self.lambda_reg)
    }

    fn f_grad(&self, u: &[f64]) -> DenseVec {
        u.iter().map(|x| x / self.lambda_reg).collect()
    }

    fn smoothness(&self) -> f64 {
        1.0 / self.lambda_reg
    }

    fn f_conj_value(&self, w: &[f64]) -> f64 {
        0.5 * self.lambda_reg * crate::linalg::dot(w, w)
    }

    fn g_value(&self, i: usize, a: f64) -> f64 {
        let y = self.labels[i];
        let m = y * a;
        if m < -self.slack() || m > self.upper() + self.slack() {
            f64::INFINITY
        } else {
            -m
        }
    }

    fn g_conj_value(&self, i: usize, s: f64) -> f64 {
        self.upper() * (1.0 + self.labels[i] * s).max(0.0)
    }

    fn conj_lipschitz(&self) -> Option<f64> {
        Some(self.upper())
    }

    fn coord_prox(&self, i: usize, v: f64, h: f64) -> f64 {
        let y = self.labels[i];
        // minimize -y z + (h/2)(z - v)^2, then clip y z into [0, 1/n]
        let m = (y * (v + y / h)).clamp(0.0, self.upper());
        y * m
    }

    fn g_dir_deriv(&self, i: usize, a: f64, dir: f64) -> f64 {
        let y = self.labels[i];
        let m = y * a;
        let outward = (m <= 0.0 && y * dir < 0.0) || (m >= self.upper() && y * dir > 0.0);
        if outward {
            f64::INFINITY
        } else {
            -y * dir
        }
    }

    fn supports_gap(&self) -> bool {
        true
    }

    fn num_coords(&self) -> Option<usize> {
        Some(self.labels.len())
    }
}

/// Closed set of shipped instances, for config-driven runs.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Lasso(LassoInstance),
    SvmDual(HingeSvmDualInstance),
}

macro_rules! dispatch {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            Problem::Lasso($p) => $e,
            Problem::SvmDual($p) => $e,
        }
    };
}

impl ObjectivePair for Problem {
    fn f_value(&self, u: &[f64]) -> f64 {
        dispatch!(self, p => p.f_value(u))
    }
    fn f_grad(&self, u: &[f64]) -> DenseVec {
        dispatch!(self, p => p.f_grad(u))
    }
    fn smoothness(&self) -> f64 {
        dispatch!(self, p => p.smoothness())
    }
    fn f_conj_value(&self, w: &[f64]) -> f64 {
        dispatch!(self, p => p.f_conj_value(w))
    }
    fn g_value(&self, i: usize, a: f64) -> f64 {
        dispatch!(self, p => p.g_value(i, a))
    }
    fn g_conj_value(&self, i: usize, s: f64) -> f64 {
        dispatch!(self, p => p.g_conj_value(i, s))
    }
    fn conj_lipschitz(&self) -> Option<f64> {
        dispatch!(self, p => p.conj_lipschitz())
    }
    fn coord_prox(&self, i: usize, v: f64, h: f64) -> f64 {
        dispatch!(self, p => p.coord_prox(i, v, h))
    }
    fn g_dir_deriv(&self, i: usize, a: f64, dir: f64) -> f64 {
        dispatch!(self, p => p.g_dir_deriv(i, a, dir))
    }
    fn supports_gap(&self) -> bool {
        dispatch!(self, p => p.supports_gap())
    }
    fn num_coords(&self) -> Option<usize> {
        dispatch!(self, p => p.num_coords())
    }
}

fn check_alpha<P: ObjectivePair + ?Sized>(p: &P, m: &ColMatrix, alpha: &[f64]) -> Result<()> {
    if alpha.len() != m.cols() {
        return Err(Error::DimensionMismatch {
            expected: m.cols(),
            got: alpha.len(),
        });
    }
    if let Some(n) = p.num_coords() {
        if n != m.cols() {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.cols(),
            });
        }
    }
    Ok(())
}

/// `sum_i g_i(alpha_i)`.
pub fn g_sum<P: ObjectivePair + ?Sized>(p: &P, alpha: &[f64]) -> f64 {
    alpha.iter().enumerate().map(|(i, &a)| p.g_value(i, a)).sum()
}

/// Primal objective `f(A alpha) + sum_i g_i(alpha_i)`; `+inf` off the domain.
pub fn primal_value<P: ObjectivePair + ?Sized>(p: &P, m: &ColMatrix, alpha: &[f64]) -> Result<f64> {
    check_alpha(p, m, alpha)?;
    let g = g_sum(p, alpha);
    if g.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let u = m.mat_vec(alpha)?;
    Ok(p.f_value(&u) + g)
}

/// Primal objective when `A alpha` is already known.
pub fn primal_value_at<P: ObjectivePair + ?Sized>(p: &P, a_alpha: &[f64], alpha: &[f64]) -> f64 {
    let g = g_sum(p, alpha);
    if g.is_infinite() {
        return f64::INFINITY;
    }
    p.f_value(a_alpha) + g
}

/// Dual map `w(alpha) = grad f(A alpha)`.
pub fn dual_map<P: ObjectivePair + ?Sized>(p: &P, m: &ColMatrix, alpha: &[f64]) -> Result<DenseVec> {
    check_alpha(p, m, alpha)?;
    Ok(p.f_grad(&m.mat_vec(alpha)?))
}

/// Dual objective `f*(w) + sum_i g_i*(-A_i^T w)`.
pub fn dual_value<P: ObjectivePair + ?Sized>(p: &P, m: &ColMatrix, w: &[f64]) -> Result<f64> {
    if !p.supports_gap() {
        return Err(Error::GapUnsupported);
    }
    if w.len() != m.rows() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            got: w.len(),
        });
    }
    let conj: f64 = (0..m.cols())
        .map(|i| p.g_conj_value(i, -m.col_dot_unchecked(i, w)))
        .sum();
    Ok(p.f_conj_value(w) + conj)
}

/// Duality gap `O_A(alpha) + O_B(w(alpha))`.
pub fn duality_gap<P: ObjectivePair + ?Sized>(p: &P, m: &ColMatrix, alpha: &[f64]) -> Result<f64> {
    if !p.supports_gap() {
        return Err(Error::GapUnsupported);
    }
    check_alpha(p, m, alpha)?;
    let u = m.mat_vec(alpha)?;
    gap_at(p, m, &u, alpha)
}

/// Duality gap when `A alpha` is already known.
pub fn gap_at<P: ObjectivePair + ?Sized>(
    p: &P,
    m: &ColMatrix,
    a_alpha: &[f64],
    alpha: &[f64],
) -> Result<f64> {
    let primal = primal_value_at(p, a_alpha, alpha);
    let w = p.f_grad(a_alpha);
    Ok(primal + dual_value(p, m, &w)?)
}

/// `O_A(alpha) - ref_opt`.
pub fn suboptimality<P: ObjectivePair + ?Sized>(
    p: &P,
    m: &ColMatrix,
    alpha: &[f64],
    ref_opt: f64,
) -> Result<f64> {
    Ok(primal_value(p, m, alpha)? - ref_opt)
}
