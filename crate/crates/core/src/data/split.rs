use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, seed: u64) -> Result<Self> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "test fraction must be in (0, 1), got {test_fraction}"
            )));
        }
        Ok(SplitSpec {
            test_fraction,
            seed,
        })
    }
}

/// Seeded shuffle, then the first `round(n · test_fraction)` rows become the
/// test set. Both parts must be valid datasets.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let spec = SplitSpec::new(spec.test_fraction, spec.seed)?;
    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let n_test = ((n as f64) * spec.test_fraction).round() as usize;
    let n_test = n_test.clamp(1, n.saturating_sub(1).max(1));
    let pick = |idx: &[usize]| idx.iter().map(|&i| dataset.examples()[i].clone()).collect();
    let test = dataset
        .with_examples(pick(&order[..n_test]))
        .map_err(|e| Error::DegenerateSplit(Box::new(e)))?;
    let train = dataset
        .with_examples(pick(&order[n_test..]))
        .map_err(|e| Error::DegenerateSplit(Box::new(e)))?;
    Ok((train, test))
}
