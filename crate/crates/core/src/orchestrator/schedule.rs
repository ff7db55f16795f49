//! Inexactness schedules `eps_t = a_t theta_t` and their translation into
//! inner iteration budgets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EpsSchedule {
    /// `a_t = r`.
    Constant { r: f64 },
    /// `a_t = r / t^p`, `p > 2`. Round 0 uses `t = 1`.
    Polynomial { r: f64, p: f64 },
}

impl EpsSchedule {
    pub fn constant(r: f64) -> Result<Self> {
        check_level(r)?;
        Ok(Self::Constant { r })
    }

    pub fn polynomial(r: f64, p: f64) -> Result<Self> {
        check_level(r)?;
        if !(p > 2.0 && p.is_finite()) {
            return Err(Error::InvalidConfig(format!("schedule exponent {p} must exceed 2")));
        }
        Ok(Self::Polynomial { r, p })
    }

    pub fn a(&self, t: usize) -> f64 {
        match *self {
            Self::Constant { r } => r,
            Self::Polynomial { r, p } => r / (t.max(1) as f64).powf(p),
        }
    }

    /// Target accuracy `eps_t = a_t theta_t`.
    pub fn eps(&self, t: usize, theta: f64) -> f64 {
        self.a(t) * theta
    }
}

fn check_level(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidConfig(format!("schedule level {r} must be positive")));
    }
    Ok(())
}

impl std::str::FromStr for EpsSchedule {
    type Err = Error;

    /// `constant:r` or `polynomial:r:p`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("bad eps schedule {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
        match parts.as_slice() {
            ["constant", r] => Self::constant(num(r)?),
            ["polynomial", r, p] => Self::polynomial(num(r)?, num(p)?),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for EpsSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Constant { r } => write!(f, "constant:{r:e}"),
            Self::Polynomial { r, p } => write!(f, "polynomial:{r:e}:{p}"),
        }
    }
}

/// Measured accuracy per inner budget, normalized by `theta_t`.
///
/// `levels[i]` is a conservative (worst observed) value of `eps / theta`
/// after `grid[i]` SDCA steps, made nonincreasing in the budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetTable {
    grid: Vec<usize>,
    levels: Vec<f64>,
}

impl BudgetTable {
    /// Builds the table from raw samples: `samples[i]` holds every observed
    /// `eps / theta` for budget `grid[i]`.
    pub fn from_samples(grid: Vec<usize>, samples: &[Vec<f64>]) -> Result<Self> {
        if grid.is_empty() || grid.len() != samples.len() {
            return Err(Error::InvalidConfig("budget grid and samples disagree".into()));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("budget grid must be strictly increasing".into()));
        }
        let mut levels: Vec<f64> = samples
            .iter()
            .map(|s| s.iter().copied().fold(0.0, f64::max))
            .collect();
        if levels.iter().any(|l| l.is_nan()) {
            return Err(Error::NonFinite("calibration sample"));
        }
        // a larger budget is never credited with worse accuracy than a smaller one
        for i in (0..levels.len() - 1).rev() {
            levels[i] = levels[i].max(levels[i + 1]);
        }
        Ok(Self { grid, levels })
    }

    pub fn grid(&self) -> &[usize] {
        &self.grid
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Smallest tabulated budget whose level is at most `a`; `None` when
    /// even the largest budget is not enough (solve exactly instead).
    pub fn budget_for(&self, a: f64) -> Option<usize> {
        self.levels
            .iter()
            .position(|&l| l <= a)
            .map(|i| self.grid[i])
    }
}

/// Geometric budget grid `base * 2^j`, `j = 0..count`, starting at `base >= 1`.
pub fn geometric_grid(base: usize, count: usize) -> Vec<usize> {
    let base = base.max(1);
    (0..count).map(|j| base << j).collect()
}
