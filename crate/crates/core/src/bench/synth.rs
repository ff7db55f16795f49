//! Seeded synthetic Lasso and SVM instances.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ColMatrix, DenseVec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub d: usize,
    /// Probability that an entry is nonzero, in `(0, 1]`.
    pub density: f64,
    /// Standard deviation of the additive noise on `b` (Lasso).
    pub noise: f64,
    pub seed: u64,
    /// Fraction of planted nonzeros (Lasso).
    pub sparsity: f64,
    /// Weight of a component shared by every column, in `[0, 1)`. Zero gives
    /// independent columns; values near one make them nearly collinear.
    pub correlation: f64,
    /// Geometric decay of the feature scales: row `j` is multiplied by
    /// `decay^j` before normalization. One leaves rows untouched.
    pub decay: f64,
    /// Minimum `|w . x_i|` enforced for the planted separator (SVM).
    pub margin: f64,
}

impl SynthSpec {
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        Self {
            n,
            d,
            density: 1.0,
            noise: 0.01,
            seed,
            sparsity: 0.1,
            correlation: 0.0,
            decay: 1.0,
            margin: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n == 0 || self.d == 0 {
            return bad(format!("need n, d > 0, got n={} d={}", self.n, self.d));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad(format!("density {} outside (0, 1]", self.density));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise {} must be >= 0", self.noise));
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return bad(format!("sparsity {} outside (0, 1]", self.sparsity));
        }
        if !(0.0..1.0).contains(&self.correlation) {
            return bad(format!("correlation {} outside [0, 1)", self.correlation));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad(format!("decay {} outside (0, 1]", self.decay));
        }
        if !(0.0..1.0).contains(&self.margin) {
            return bad(format!("margin {} outside [0, 1)", self.margin));
        }
        Ok(())
    }
}

/// A generated instance. `planted` is the sparse coefficient vector for
/// Lasso (length n) and the separating direction for SVM (length d).
#[derive(Debug, Clone, PartialEq)]
pub struct SynthProblem {
    pub matrix: ColMatrix,
    pub b: Option<DenseVec>,
    pub labels: Option<Vec<f64>>,
    pub planted: DenseVec,
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Dense column lists before normalization.
fn raw_columns(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let d = spec.d;
    let shared: Vec<f64> = (0..d).map(|_| gauss(rng)).collect();
    let (own, mix) = ((1.0 - spec.correlation).sqrt(), spec.correlation.sqrt());
    let mut cols = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let mut col = vec![0.0; d];
        let mut any = false;
        for v in col.iter_mut() {
            if rng.random::<f64>() < spec.density {
                *v = gauss(rng);
                any = true;
            }
        }
        if !any {
            col[rng.random_range(0..d)] = gauss(rng);
        }
        let nrm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if spec.correlation > 0.0 {
            let shared_nrm = shared.iter().map(|v| v * v).sum::<f64>().sqrt();
            for (v, s) in col.iter_mut().zip(&shared) {
                *v = own * *v / nrm + mix * s / shared_nrm;
            }
        }
        if spec.decay < 1.0 {
            let mut scale = 1.0;
            for v in col.iter_mut() {
                *v *= scale;
                scale *= spec.decay;
            }
        }
        cols.push(col);
    }
    cols
}

fn to_matrix(d: usize, cols: &[Vec<f64>]) -> Result<ColMatrix> {
    let sparse = cols
        .iter()
        .map(|c| {
            c.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(r, v)| (r, *v))
                .collect()
        })
        .collect();
    Ok(ColMatrix::from_columns(d, sparse)?.normalize_columns().0)
}

/// Normalized columns, `b = A planted + noise` with an s-sparse planted
/// vector (`s = ceil(sparsity n)`).
pub fn synth_lasso(spec: &SynthSpec) -> Result<SynthProblem> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let matrix = to_matrix(spec.d, &raw_columns(spec, &mut rng))?;
    let s = ((spec.sparsity * spec.n as f64).ceil() as usize).clamp(1, spec.n);
    let mut planted = DenseVec::zeros(spec.n);
    for i in sample(&mut rng, spec.n, s) {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        planted[i] = sign * (1.0 + gauss(&mut rng).abs());
    }
    let mut b = matrix.mat_vec(&planted)?;
    for v in b.iter_mut() {
        *v += spec.noise * gauss(&mut rng);
    }
    Ok(SynthProblem {
        matrix,
        b: Some(b),
        labels: None,
        planted,
    })
}

/// Normalized examples labelled by a random unit separator, with every
/// example pushed to at least `margin` from the separating hyperplane.
pub fn synth_svm(spec: &SynthSpec) -> Result<SynthProblem> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut cols = raw_columns(spec, &mut rng);
    let mut w: Vec<f64> = (0..spec.d).map(|_| gauss(&mut rng)).collect();
    let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    w.iter_mut().for_each(|v| *v /= wn);
    let mut labels = Vec::with_capacity(spec.n);
    for col in &mut cols {
        let nrm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        col.iter_mut().for_each(|v| *v /= nrm);
        let proj: f64 = col.iter().zip(&w).map(|(a, b)| a * b).sum();
        let y = if proj >= 0.0 { 1.0 } else { -1.0 };
        if proj.abs() < spec.margin {
            // move along w so that y (w . x) = margin exactly, then renormalize
            let shift = y * spec.margin - proj;
            for (v, wj) in col.iter_mut().zip(&w) {
                *v += shift * wj;
            }
        }
        labels.push(y);
    }
    let matrix = to_matrix(spec.d, &cols)?;
    Ok(SynthProblem {
        matrix,
        b: None,
        labels: Some(labels),
        planted: w.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_fixed_seed() {
        let spec = SynthSpec::new(8, 4, 11);
        let a = synth_lasso(&spec).unwrap();
        let b = synth_lasso(&spec).unwrap();
        assert_eq!(a, b);
        let other = synth_lasso(&SynthSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a.matrix, other.matrix);
    }

    #[test]
    fn zero_density_rejected() {
        let spec = SynthSpec {
            density: 0.0,
            ..SynthSpec::new(8, 4, 0)
        };
        assert!(matches!(synth_lasso(&spec), Err(Error::InvalidSpec(_))));
        assert!(matches!(synth_svm(&spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn columns_are_unit_and_nonempty() {
        let spec = SynthSpec {
            density: 0.05,
            ..SynthSpec::new(40, 10, 3)
        };
        let p = synth_lasso(&spec).unwrap();
        for &nrm in p.matrix.col_norms() {
            assert!((nrm - 1.0).abs() < 1e-12);
        }
        let planted_nnz = p.planted.iter().filter(|v| **v != 0.0).count();
        assert_eq!(planted_nnz, 4);
    }

    #[test]
    fn svm_labels_separable_with_margin() {
        let spec = SynthSpec {
            margin: 0.1,
            ..SynthSpec::new(60, 6, 5)
        };
        let p = synth_svm(&spec).unwrap();
        let labels = p.labels.unwrap();
        for i in 0..60 {
            let m = labels[i] * p.matrix.col_dot(i, &p.planted).unwrap();
            // renormalization can only shrink the margin by the column norm
            assert!(m > 0.05, "example {i} margin {m}");
        }
    }
}
