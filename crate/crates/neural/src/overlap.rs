use crate::{NeuralError, Result};

/// Averages overlapping window estimates. Row `i` of `outputs` (width
/// `width`) covers absolute positions `starts[i] .. starts[i] + width`;
/// `out[t]` is the mean of every cell landing on `t`. Cells outside
/// `0..length` are ignored.
pub fn overlap_average(outputs: &[f64], width: usize, starts: &[i64], length: usize) -> Result<Vec<f64>> {
    if width == 0 || outputs.len() != width * starts.len() {
        return Err(NeuralError::InvalidSpec(format!(
            "{} outputs for {} windows of width {width}",
            outputs.len(),
            starts.len()
        )));
    }
    let mut sum = vec![0.0; length];
    let mut count = vec![0u32; length];
    for (row, &start) in outputs.chunks(width).zip(starts) {
        for (j, &v) in row.iter().enumerate() {
            let p = start + j as i64;
            if (0..length as i64).contains(&p) {
                sum[p as usize] += v;
                count[p as usize] += 1;
            }
        }
    }
    if let Some(t) = count.iter().position(|&c| c == 0) {
        return Err(NeuralError::Uncovered(t));
    }
    Ok(sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_overlapping_windows() {
        assert_eq!(overlap_average(&[1.0, 3.0, 5.0, 7.0], 2, &[0, 1], 3).unwrap(), vec![1.0, 4.0, 7.0]);
    }

    #[test]
    fn disjoint_windows_concatenate() {
        let out = overlap_average(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 3, &[0, 3], 6).unwrap();
        assert_eq!(out, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn uncovered_index() {
        assert_eq!(overlap_average(&[1.0, 2.0], 2, &[0], 3).unwrap_err(), NeuralError::Uncovered(2));
    }
}
