use serde::{Deserialize, Serialize};

use crate::{Result, TreeError};

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(TreeError::InvalidParameter(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(TreeError::InvalidParameter("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// Row `t` is `[x(t-lag+1), ..., x(t)]`, zero-padded on the left. Also
/// returns the grid index each row predicts (the identity map).
pub fn build_lag_features(aggregate: &[f64], lag: usize) -> Result<(Matrix, Vec<usize>)> {
    if lag < 1 {
        return Err(TreeError::InvalidLag);
    }
    let mut data = Vec::with_capacity(aggregate.len() * lag);
    for t in 0..aggregate.len() {
        for j in 0..lag {
            let back = lag - 1 - j;
            data.push(if t >= back { aggregate[t - back] } else { 0.0 });
        }
    }
    Ok((Matrix::new(aggregate.len(), lag, data)?, (0..aggregate.len()).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lag_one_is_identity() {
        let (m, idx) = build_lag_features(&[1.0, 2.0], 1).unwrap();
        assert_eq!(m.row(1), &[2.0]);
        assert_eq!(idx, vec![0, 1]);
    }

    #[test]
    fn lag_three() {
        let (m, _) = build_lag_features(&[5.0, 6.0, 7.0], 3).unwrap();
        assert_eq!(m.row(0), &[0.0, 0.0, 5.0]);
        assert_eq!(m.row(1), &[0.0, 5.0, 6.0]);
        assert_eq!(m.row(2), &[5.0, 6.0, 7.0]);
    }

    #[test]
    fn lag_longer_than_series() {
        let (m, _) = build_lag_features(&[4.0, 9.0], 5).unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.row(1), &[0.0, 0.0, 0.0, 4.0, 9.0]);
        assert_eq!(build_lag_features(&[1.0], 0).unwrap_err(), TreeError::InvalidLag);
    }
}
