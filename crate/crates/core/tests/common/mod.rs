//! Instance builders and independent single-machine oracles shared by the
//! integration tests. The oracles work on dense row-major copies of the
//! data and never call into the distributed code path.
#![allow(dead_code)]

use std::sync::Arc;

use cocoa_core::bench::experiment::lambda1_max;
use cocoa_core::bench::reference::{reference_solution, ReferenceOptions, ReferenceSolution};
use cocoa_core::bench::synth::{synth_lasso, synth_svm, SynthSpec};
use cocoa_core::{ColMatrix, HingeSvmDualInstance, LassoInstance, Problem};

pub struct Fixture {
    pub problem: Problem,
    pub matrix: Arc<ColMatrix>,
    pub reference: Option<ReferenceSolution>,
}

/// Synthetic Lasso with `lambda1 = lam_rel * lambda1_max`.
pub fn lasso_fixture(spec: SynthSpec, lam_rel: f64, with_reference: bool) -> Fixture {
    let sp = synth_lasso(&spec).expect("synthetic lasso");
    let b = sp.b.expect("lasso target");
    let lambda1 = lam_rel * lambda1_max(&sp.matrix, &b).unwrap();
    let problem = Problem::Lasso(LassoInstance::new(b, lambda1).unwrap());
    let reference = with_reference.then(|| {
        reference_solution(&problem, &sp.matrix, ReferenceOptions::default()).expect("reference solve")
    });
    Fixture {
        problem,
        matrix: Arc::new(sp.matrix),
        reference,
    }
}

pub fn svm_fixture(spec: SynthSpec, lambda_reg: f64) -> Fixture {
    let sp = synth_svm(&spec).expect("synthetic svm");
    let problem = Problem::SvmDual(HingeSvmDualInstance::new(sp.labels.unwrap(), lambda_reg).unwrap());
    Fixture {
        problem,
        matrix: Arc::new(sp.matrix),
        reference: None,
    }
}

pub fn dense_columns(m: &ColMatrix) -> Vec<Vec<f64>> {
    (0..m.cols()).map(|i| m.column_dense(i).into_vec()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Dense single-machine Lasso model used by the K = 1 oracles.
pub struct DenseLasso {
    /// Columns `A_i`.
    pub cols: Vec<Vec<f64>>,
    pub gram: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub lambda1: f64,
}

impl DenseLasso {
    pub fn new(cols: Vec<Vec<f64>>, b: Vec<f64>, lambda1: f64) -> Self {
        let gram = cols
            .iter()
            .map(|ci| cols.iter().map(|cj| dot(ci, cj)).collect())
            .collect();
        Self {
            cols,
            gram,
            b,
            lambda1,
        }
    }

    fn n(&self) -> usize {
        self.cols.len()
    }

    /// `A^T (A x - b)`.
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let d = self.b.len();
        let mut r = vec![0.0; d];
        for (c, &xi) in self.cols.iter().zip(x) {
            for j in 0..d {
                r[j] += c[j] * xi;
            }
        }
        for j in 0..d {
            r[j] -= self.b[j];
        }
        self.cols.iter().map(|c| dot(c, &r)).collect()
    }

    /// `argmin_z lambda1 ||z||_1 + c^T z + (q/2)(z - center)^T G (z - center)`
    /// by dense coordinate descent on the Gram matrix. `G` must be positive
    /// definite for the minimizer to be unique.
    pub fn metric_prox(&self, c: &[f64], center: &[f64], q: f64) -> Vec<f64> {
        let n = self.n();
        let mut z = center.to_vec();
        for _ in 0..1_000_000 {
            let mut moved: f64 = 0.0;
            for i in 0..n {
                let gii = self.gram[i][i];
                // derivative of the smooth part along i, excluding the i-th diagonal term
                let mut off = c[i];
                for j in 0..n {
                    if j != i {
                        off += q * self.gram[i][j] * (z[j] - center[j]);
                    }
                }
                let h = q * gii;
                let new = soft(center[i] - off / h, self.lambda1 / h);
                moved = moved.max((new - z[i]).abs());
                z[i] = new;
            }
            if moved <= 1e-15 {
                return z;
            }
        }
        panic!("dense metric prox did not converge");
    }
}

/// `theta_{t+1}` by the textbook closed form.
pub fn theta_closed_form(gamma: f64, th: f64) -> f64 {
    ((gamma * gamma * th.powi(4) + 4.0 * th * th).sqrt() - gamma * th * th) / 2.0
}

/// Accelerated proximal-gradient recursion (gamma = 1, sigma' = 1, L = 1)
/// in the A^T A metric; with orthonormal columns this is the classic
/// accelerated proximal gradient method with step 1.
pub fn accelerated_oracle(model: &DenseLasso, iters: usize) -> Vec<Vec<f64>> {
    let n = model.n();
    let mut alpha = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut theta: f64 = 1.0;
    let mut trace = vec![alpha.clone()];
    for _ in 0..iters {
        let y: Vec<f64> = (0..n).map(|i| (1.0 - theta) * alpha[i] + theta * z[i]).collect();
        let c = model.grad(&y);
        // the linear term is c^T (z - y); dropping the constant c^T y
        let z_new = model.metric_prox(&c, &z, theta);
        alpha = (0..n).map(|i| y[i] + theta * (z_new[i] - z[i])).collect();
        z = z_new;
        theta = theta_closed_form(1.0, theta);
        trace.push(alpha.clone());
    }
    trace
}

/// Plain proximal gradient in the same metric.
pub fn prox_gradient_oracle(model: &DenseLasso, iters: usize) -> Vec<Vec<f64>> {
    let n = model.n();
    let mut alpha = vec![0.0; n];
    let mut trace = vec![alpha.clone()];
    for _ in 0..iters {
        let c = model.grad(&alpha);
        alpha = model.metric_prox(&c, &alpha, 1.0);
        trace.push(alpha.clone());
    }
    trace
}

/// Accelerated proximal gradient in its z-sequence form with step `1/L`,
/// `L = 1`: `y = (1 - th) x + th z`, `z+ = prox_{l1/th}(z - grad(y)/th)`,
/// `x+ = (1 - th) x + th z+`. Valid when `A^T A = I`.
pub fn classic_accelerated(model: &DenseLasso, iters: usize) -> Vec<Vec<f64>> {
    let n = model.n();
    let mut x = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut theta: f64 = 1.0;
    let mut trace = vec![x.clone()];
    for _ in 0..iters {
        let y: Vec<f64> = (0..n).map(|i| (1.0 - theta) * x[i] + theta * z[i]).collect();
        let g = model.grad(&y);
        z = (0..n).map(|i| soft(z[i] - g[i] / theta, model.lambda1 / theta)).collect();
        x = (0..n).map(|i| (1.0 - theta) * x[i] + theta * z[i]).collect();
        theta = theta_closed_form(1.0, theta);
        trace.push(x.clone());
    }
    trace
}

/// Proximal gradient with step `1/L`, `L = 1`. Valid when `A^T A = I`.
pub fn classic_prox_gradient(model: &DenseLasso, iters: usize) -> Vec<Vec<f64>> {
    let n = model.n();
    let mut x = vec![0.0; n];
    let mut trace = vec![x.clone()];
    for _ in 0..iters {
        let g = model.grad(&x);
        x = (0..n).map(|i| soft(x[i] - g[i], model.lambda1)).collect();
        trace.push(x.clone());
    }
    trace
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
