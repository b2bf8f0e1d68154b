//! Row-major feature matrices holding draws from P or Q.

use crate::error::{Error, Result};

/// A dense n x d matrix of real features, one sample per row. Label semantics
/// are positional: P-samples and Q-samples travel as two separate datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    xs: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Dataset {
    /// Build from flat row-major storage. Requires at least one row and all
    /// entries finite.
    pub fn new(xs: Vec<f64>, cols: usize) -> Result<Self> {
        if cols == 0 || xs.is_empty() || xs.len() % cols != 0 {
            return Err(Error::InvalidParameter(format!(
                "dataset storage length {} incompatible with {} columns",
                xs.len(),
                cols
            )));
        }
        if xs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "dataset contains non-finite entry".into(),
            ));
        }
        let rows = xs.len() / cols;
        Ok(Self { xs, rows, cols })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptySample);
        }
        let cols = rows[0].len();
        let mut xs = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::InvalidParameter("ragged rows".into()));
            }
            xs.extend_from_slice(r);
        }
        Self::new(xs, cols)
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.xs[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.xs.chunks(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.xs
    }

    /// Split into a `[0, at)` head and `[at, rows)` tail.
    pub fn split_at_row(&self, at: usize) -> Result<(Dataset, Dataset)> {
        if at == 0 || at >= self.rows {
            return Err(Error::InvalidParameter(format!(
                "split at {} outside 1..{}",
                at, self.rows
            )));
        }
        let head = Dataset::new(self.xs[..at * self.cols].to_vec(), self.cols)?;
        let tail = Dataset::new(self.xs[at * self.cols..].to_vec(), self.cols)?;
        Ok((head, tail))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_nonfinite() {
        assert!(Dataset::new(vec![], 2).is_err());
        assert!(Dataset::new(vec![1.0, f64::NAN], 2).is_err());
        assert!(Dataset::new(vec![1.0, f64::INFINITY], 2).is_err());
        assert!(Dataset::new(vec![1.0, 2.0, 3.0], 2).is_err());
    }

    #[test]
    fn row_access() {
        let d = Dataset::new(vec![1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(d.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn split_preserves_rows() {
        let d = Dataset::new((0..12).map(|i| i as f64).collect(), 3).unwrap();
        let (a, b) = d.split_at_row(1).unwrap();
        assert_eq!(a.n_rows(), 1);
        assert_eq!(b.n_rows(), 3);
        assert_eq!(b.row(0), &[3.0, 4.0, 5.0]);
    }
}
