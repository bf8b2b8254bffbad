//! Seeded train/test/validation partitioning.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub test: f64,
    pub validation: f64,
    pub seed: u64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.8, test: 0.1, validation: 0.1, seed: 42 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), String> {
        let parts = [self.train, self.test, self.validation];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err("split ratios must lie in [0, 1]".into());
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err("split ratios must sum to 1".into());
        }
        Ok(())
    }

    /// (train, test, validation) sizes for `n` records.
    ///
    /// Train takes floor(train * n); the remainder is divided in proportion,
    /// rounding the test share up (an even test/validation split gives test
    /// the odd record).
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let train = ((self.train * n as f64) + 1e-9).floor() as usize;
        let train = train.min(n);
        let rest = n - train;
        let tv = self.test + self.validation;
        let test = if tv <= 0.0 {
            rest
        } else {
            ((rest as f64 * self.test / tv) - 1e-9).ceil().max(0.0) as usize
        };
        let test = test.min(rest);
        (train, test, rest - test)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub test: Vec<T>,
    pub validation: Vec<T>,
}

impl<T> Split<T> {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.test.len(), self.validation.len())
    }

    pub fn parts(&self) -> [(&'static str, &[T]); 3] {
        [("train", &self.train), ("test", &self.test), ("validation", &self.validation)]
    }
}

/// Shuffles with ChaCha8 seeded by `ratios.seed` and cuts the shuffled
/// order into train, test and validation.
pub fn split_dataset<T: Clone>(records: &[T], ratios: &SplitRatios) -> Split<T> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(ratios.seed));
    let (train, test, _) = ratios.sizes(records.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<T>>();
    Split {
        train: pick(&order[..train]),
        test: pick(&order[train..train + test]),
        validation: pick(&order[train + test..]),
    }
}
