//! Split bookkeeping with an access log on the test split.

use std::cell::RefCell;

use nilm_core::AlignedDataset;

/// The test split. Reading it requires naming a purpose, and every read is
/// recorded.
#[derive(Debug)]
pub struct TestSplit {
    data: AlignedDataset,
    accesses: RefCell<Vec<String>>,
}

impl TestSplit {
    pub fn new(data: AlignedDataset) -> Self {
        Self {
            data,
            accesses: RefCell::new(Vec::new()),
        }
    }

    pub fn open(&self, purpose: &str) -> &AlignedDataset {
        self.accesses.borrow_mut().push(purpose.to_string());
        &self.data
    }

    pub fn accesses(&self) -> Vec<String> {
        self.accesses.borrow().clone()
    }

    pub fn access_count(&self) -> usize {
        self.accesses.borrow().len()
    }
}

#[derive(Debug)]
pub struct Splits {
    pub train: AlignedDataset,
    pub val: AlignedDataset,
    pub test: TestSplit,
}

#[cfg(test)]
mod tests {
    use super::*;
    use nilm_core::PowerSeries;

    #[test]
    fn reads_are_logged() {
        let s = PowerSeries::new("aggregate", 0, 60, vec![1.0; 4]).unwrap();
        let t = TestSplit::new(AlignedDataset::new(s, vec![]).unwrap());
        assert_eq!(t.access_count(), 0);
        assert_eq!(t.open("final").len(), 4);
        assert_eq!(t.accesses(), vec!["final".to_string()]);
    }
}
