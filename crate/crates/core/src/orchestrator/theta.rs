//! The acceleration sequence `theta_t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaSequence {
    gamma: f64,
    current: f64,
    t: usize,
}

impl ThetaSequence {
    /// Starts at `theta_0 = 1`.
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidGamma { gamma, k: 0 });
        }
        Ok(Self {
            gamma,
            current: 1.0,
            t: 0,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Moves to `theta_{t+1}` and returns it.
    pub fn advance(&mut self) -> f64 {
        self.current = theta_next(self.gamma, self.current);
        self.t += 1;
        self.current
    }
}

impl Iterator for ThetaSequence {
    type Item = f64;

    /// Yields `theta_t` and then advances.
    fn next(&mut self) -> Option<f64> {
        let now = self.current;
        self.advance();
        Some(now)
    }
}

/// Positive root of `x^2 + gamma theta^2 x - theta^2 = 0`.
///
/// The closed form `(sqrt(g^2 th^4 + 4 th^2) - g th^2) / 2` cancels badly
/// once theta is small; this is the same root rewritten without the
/// subtraction.
pub fn theta_next(gamma: f64, theta: f64) -> f64 {
    let gt = gamma * theta;
    2.0 * theta / ((gt * gt + 4.0).sqrt() + gt)
}

/// Relative residual of `(1 - gamma theta') / theta'^2 = 1 / theta^2`,
/// i.e. `|(1 - gamma theta') theta^2 / theta'^2 - 1|`.
pub fn recurrence_residual(gamma: f64, theta: f64, next: f64) -> f64 {
    ((1.0 - gamma * next) * (theta / next) * (theta / next) - 1.0).abs()
}

/// `2 / (t gamma + 2)`, an upper bound on `theta_t`.
pub fn theta_upper_bound(gamma: f64, t: usize) -> f64 {
    2.0 / (t as f64 * gamma + 2.0)
}
