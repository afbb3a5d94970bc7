//! Sliding windows over a value array.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Padding {
    #[default]
    Zero,
    /// Repeat the nearest edge value.
    Edge,
}

/// Row-major window matrix plus the source index each row is anchored at.
#[derive(Debug, Clone, PartialEq)]
pub struct Windows {
    pub window: usize,
    pub data: Vec<f64>,
    pub anchors: Vec<usize>,
}

impl Windows {
    pub fn rows(&self) -> usize {
        self.anchors.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.window..(i + 1) * self.window]
    }
}

/// Windows centred on every `stride`-th index: row `i` holds
/// `values[c - window/2 .. c - window/2 + window]` for anchor `c`, padded at
/// the edges. With stride 1 there is exactly one row per input value.
pub fn make_windows(values: &[f64], window: usize, stride: usize, pad: Padding) -> Result<Windows> {
    anchored(values, window, stride, pad, window / 2)
}

/// Windows ending at every `stride`-th index (the anchor is the last cell).
pub fn trailing_windows(values: &[f64], window: usize, stride: usize, pad: Padding) -> Result<Windows> {
    anchored(values, window, stride, pad, window.saturating_sub(1))
}

fn anchored(values: &[f64], window: usize, stride: usize, pad: Padding, offset: usize) -> Result<Windows> {
    if window < 1 || stride < 1 {
        return Err(Error::InvalidWindow);
    }
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = values.len() as isize;
    let anchors: Vec<usize> = (0..values.len()).step_by(stride).collect();
    let mut data = Vec::with_capacity(anchors.len() * window);
    for &c in &anchors {
        let first = c as isize - offset as isize;
        for j in 0..window as isize {
            let p = first + j;
            let v = if (0..n).contains(&p) {
                values[p as usize]
            } else {
                match pad {
                    Padding::Zero => 0.0,
                    Padding::Edge => values[p.clamp(0, n - 1) as usize],
                }
            };
            data.push(v);
        }
    }
    Ok(Windows { window, data, anchors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centred_zero_padding() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        let w = make_windows(&v, 3, 1, Padding::Zero).unwrap();
        assert_eq!(w.rows(), 5);
        assert_eq!(w.row(0), &[0.0, 1.0, 2.0]);
        assert_eq!(w.row(4), &[4.0, 5.0, 0.0]);
    }

    #[test]
    fn window_of_one() {
        let v = [1.0, 2.0, 3.0];
        let w = make_windows(&v, 1, 1, Padding::Zero).unwrap();
        assert_eq!(w.data, v.to_vec());
    }

    #[test]
    fn window_longer_than_series() {
        let w = make_windows(&[1.0, 2.0], 5, 1, Padding::Zero).unwrap();
        assert_eq!(w.rows(), 2);
        assert_eq!(w.row(0), &[0.0, 0.0, 1.0, 2.0, 0.0]);
        assert_eq!(w.row(1), &[0.0, 1.0, 2.0, 0.0, 0.0]);
        let e = make_windows(&[1.0, 2.0], 5, 1, Padding::Edge).unwrap();
        assert_eq!(e.row(0), &[1.0, 1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn trailing() {
        let w = trailing_windows(&[5.0, 6.0, 7.0], 3, 1, Padding::Zero).unwrap();
        assert_eq!(w.row(0), &[0.0, 0.0, 5.0]);
        assert_eq!(w.row(2), &[5.0, 6.0, 7.0]);
    }

    #[test]
    fn stride_and_errors() {
        let w = make_windows(&[1.0; 10], 4, 3, Padding::Zero).unwrap();
        assert_eq!(w.anchors, vec![0, 3, 6, 9]);
        assert_eq!(make_windows(&[1.0], 0, 1, Padding::Zero).unwrap_err(), Error::InvalidWindow);
        assert_eq!(make_windows(&[1.0], 1, 0, Padding::Zero).unwrap_err(), Error::InvalidWindow);
    }
}
