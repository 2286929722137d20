use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{bail, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum SplitPolicy {
    /// Seeded shuffle, then the first `train` fraction goes to training.
    Fraction { train: f64, seed: u64 },
    /// Rows with `time < threshold` train, the rest test.
    Time { threshold: f64 },
}

/// Disjoint, exhaustive train/test split. Each side keeps dataset order.
pub fn split(dataset: &Dataset, policy: &SplitPolicy) -> Result<(Dataset, Dataset)> {
    let n = dataset.len();
    let (mut train, mut test): (Vec<usize>, Vec<usize>) = match policy {
        SplitPolicy::Fraction { train, seed } => {
            if !(*train > 0.0 && *train < 1.0) {
                bail!(Config, "train fraction must lie in (0, 1), got {}", train);
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
            let cut = libm::round(train * n as f64) as usize;
            let test = order.split_off(cut);
            (order, test)
        }
        SplitPolicy::Time { threshold } => {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (i, s) in dataset.samples.iter().enumerate() {
                match s.time {
                    Some(t) if t < *threshold => train.push(i),
                    Some(_) => test.push(i),
                    None => bail!(Data, "row {} has no time value", i),
                }
            }
            (train, test)
        }
    };
    if train.is_empty() || test.is_empty() {
        bail!(Contract, "split leaves {} train and {} test rows", train.len(), test.len());
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((dataset.subset(&train), dataset.subset(&test)))
}
