use crate::{ClassicError, Result};

/// Bijection between per-appliance state tuples and a flat index over the
/// Cartesian product. The first appliance varies fastest:
/// `flat = s0 + k0 * (s1 + k1 * (s2 + ...))`, so ties resolved by smallest
/// flat index favour "on" states of earlier appliances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointStateIndex {
    sizes: Vec<usize>,
    len: usize,
}

impl JointStateIndex {
    pub fn new(sizes: &[usize], cap: usize) -> Result<Self> {
        let mut len: usize = 1;
        for &k in sizes {
            if k == 0 {
                return Err(ClassicError::InvalidModel("appliance with zero states".into()));
            }
            len = len.checked_mul(k).filter(|&l| l <= cap).ok_or(ClassicError::CapExceeded {
                states: sizes.iter().fold(1usize, |a, &k| a.saturating_mul(k)),
                cap,
            })?;
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            len,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn flatten(&self, states: &[usize]) -> usize {
        debug_assert_eq!(states.len(), self.sizes.len());
        states
            .iter()
            .zip(&self.sizes)
            .rev()
            .fold(0, |acc, (&s, &k)| acc * k + s)
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        self.sizes
            .iter()
            .map(|&k| {
                let s = flat % k;
                flat /= k;
                s
            })
            .collect()
    }

    /// Per-appliance state of every flat index, row-major `len x appliances`.
    pub fn table(&self) -> Vec<usize> {
        (0..self.len).flat_map(|f| self.unflatten(f)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_appliance_fastest() {
        let j = JointStateIndex::new(&[2, 2], 16).unwrap();
        assert!(j.flatten(&[1, 0]) < j.flatten(&[0, 1]));
        assert_eq!(j.unflatten(1), vec![1, 0]);
    }

    #[test]
    fn cap() {
        assert!(matches!(
            JointStateIndex::new(&[3, 3, 3], 20),
            Err(ClassicError::CapExceeded { states: 27, cap: 20 })
        ));
    }

    proptest! {
        #[test]
        fn round_trip(sizes in proptest::collection::vec(1usize..5, 1..5), seed in 0usize..10_000) {
            let j = JointStateIndex::new(&sizes, 4096).unwrap();
            let flat = seed % j.len();
            prop_assert_eq!(j.flatten(&j.unflatten(flat)), flat);
        }
    }
}
