use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, LabeledExample};
use crate::error::{Error, Result};

/// Scales below this are floored so constant columns map to zero.
pub const SCALE_FLOOR: f64 = 1e-8;

/// Per-feature z-score statistics. Non-continuous features keep mean 0 and
/// scale 1, so applying the normalizer leaves them untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub continuous: Vec<bool>,
}

impl Normalizer {
    /// Population mean and standard deviation over `rows` for every feature
    /// flagged in `continuous`.
    pub fn fit<'a, I>(rows: I, continuous: Vec<bool>) -> Self
    where
        I: IntoIterator<Item = &'a [f64]> + Clone,
    {
        let dim = continuous.len();
        let mut means = vec![0.0; dim];
        let mut n = 0usize;
        for row in rows.clone() {
            for (m, x) in means.iter_mut().zip(row) {
                *m += x;
            }
            n += 1;
        }
        let n = n.max(1) as f64;
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; dim];
        for row in rows {
            for ((v, x), m) in vars.iter_mut().zip(row).zip(&means) {
                *v += (x - m) * (x - m);
            }
        }
        let mut scales: Vec<f64> = vars
            .iter()
            .map(|v| (v / n).sqrt().max(SCALE_FLOOR))
            .collect();
        for j in 0..dim {
            if !continuous[j] {
                means[j] = 0.0;
                scales[j] = 1.0;
            }
        }
        Normalizer {
            means,
            scales,
            continuous,
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for j in 0..row.len().min(self.dim()) {
            if self.continuous[j] {
                row[j] = (row[j] - self.means[j]) / self.scales[j];
            }
        }
    }
}

/// Fits z-score statistics on the continuous columns of a training set.
pub fn fit_normalizer(train: &Dataset) -> Normalizer {
    Normalizer::fit(
        train.examples().iter().map(|e| e.features.as_slice()),
        train.encoding().continuous_mask(),
    )
}

pub fn apply_normalizer(stats: &Normalizer, dataset: &Dataset) -> Result<Dataset> {
    if stats.dim() != dataset.dim() {
        return Err(Error::DimMismatch {
            expected: stats.dim(),
            found: dataset.dim(),
        });
    }
    let examples: Vec<LabeledExample> = dataset
        .examples()
        .iter()
        .map(|e| {
            let mut e = e.clone();
            stats.apply_row(&mut e.features);
            e
        })
        .collect();
    dataset.with_examples(examples)
}
