//! Capacity functions mapping ensemble size to a capacity index in [0, 1].
//!
//! For an ensemble of maximal size N:
//!   linear:      c(i) = c0 * i / N
//!   logarithmic: c(i) = c0 * ln(i + 1) / ln(N + 1)
//! Both vanish at i = 0 and increase strictly up to c(N) = c0.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum CapacityFunction {
    Linear { c0: f64, n_max: usize },
    Logarithmic { c0: f64, n_max: usize },
    /// Explicit table; entry `i` is c(i), so the domain is 0..values.len().
    Table { values: Vec<f64> },
}

impl CapacityFunction {
    pub fn linear(c0: f64, n_max: usize) -> Result<Self> {
        Self::check_c0_n(c0, n_max)?;
        Ok(Self::Linear { c0, n_max })
    }

    pub fn logarithmic(c0: f64, n_max: usize) -> Result<Self> {
        Self::check_c0_n(c0, n_max)?;
        Ok(Self::Logarithmic { c0, n_max })
    }

    /// Table entries must start at 0, increase strictly, and stay in [0, 1].
    pub fn table(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter(
                "capacity table needs at least two entries".into(),
            ));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidParameter("capacity table must start at 0".into()));
        }
        for w in values.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParameter(
                    "capacity table must be strictly increasing".into(),
                ));
            }
        }
        if values.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidParameter(
                "capacity table values must lie in [0, 1]".into(),
            ));
        }
        Ok(Self::Table { values })
    }

    fn check_c0_n(c0: f64, n_max: usize) -> Result<()> {
        if !(c0 > 0.0 && c0 <= 1.0) {
            return Err(Error::InvalidParameter(format!("c0 = {c0} outside (0, 1]")));
        }
        if n_max == 0 {
            return Err(Error::InvalidParameter("n_max must be positive".into()));
        }
        Ok(())
    }

    /// Largest admissible index N.
    pub fn max_index(&self) -> usize {
        match self {
            Self::Linear { n_max, .. } | Self::Logarithmic { n_max, .. } => *n_max,
            Self::Table { values } => values.len() - 1,
        }
    }

    /// c(i) for 0 <= i <= N.
    pub fn eval(&self, i: usize) -> Result<f64> {
        let n = self.max_index();
        if i > n {
            return Err(Error::IndexBeyondEnsemble { index: i, max: n });
        }
        Ok(match self {
            Self::Linear { c0, n_max } => c0 * (i as f64 / *n_max as f64),
            Self::Logarithmic { c0, n_max } => {
                // Ratio first: ln(N+1)/ln(N+1) is exactly 1, so c(N) = c0.
                c0 * (((i + 1) as f64).ln() / ((*n_max + 1) as f64).ln())
            }
            Self::Table { values } => values[i],
        })
    }
}
