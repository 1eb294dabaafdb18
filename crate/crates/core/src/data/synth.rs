use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, ColumnSpec, Schema, ValueSet};
use crate::domain::{Dataset, EncodingMeta, LabeledExample, SensitiveGroup};
use crate::error::{Error, Result};
use crate::model::sigmoid;

/// Label flip probabilities `P(y ≠ ȳ | ȳ, s)` for one group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FlipRates {
    /// `P(y=0 | ȳ=1)`
    pub pos_to_neg: f64,
    /// `P(y=1 | ȳ=0)`
    pub neg_to_pos: f64,
}

/// Generator for datasets with a known fair label and biased observed label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_per_group: usize,
    pub dim: usize,
    /// Feature means for groups 0 and 1.
    pub means: [Vec<f64>; 2],
    /// Shared per-feature standard deviations.
    pub scales: Vec<f64>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub bias: f64,
    pub flips: [FlipRates; 2],
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_per_group == 0 || self.dim == 0 {
            return bad("n_per_group and dim must be positive".into());
        }
        for (name, len) in [
            ("means[0]", self.means[0].len()),
            ("means[1]", self.means[1].len()),
            ("scales", self.scales.len()),
            ("weights", self.weights.len()),
        ] {
            if len != self.dim {
                return bad(format!("{name} has length {len}, expected {}", self.dim));
            }
        }
        if self.scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad("scales must be positive".into());
        }
        for f in &self.flips {
            for r in [f.pos_to_neg, f.neg_to_pos] {
                if !(0.0..1.0).contains(&r) {
                    return bad(format!("flip rate {r} outside [0, 1)"));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SynthSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Empirical rates of a generated sample, per group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizedRates {
    /// `P(ȳ=1 | s)`
    pub true_rate: [f64; 2],
    /// `P(y=1 | s)`
    pub biased_rate: [f64; 2],
    /// Observed `P(y=0 | ȳ=1, s)`, absent without fair positives.
    pub pos_to_neg: [Option<f64>; 2],
    /// Observed `P(y=1 | ȳ=0, s)`, absent without fair negatives.
    pub neg_to_pos: [Option<f64>; 2],
}

impl RealizedRates {
    pub fn count(examples: &[LabeledExample], true_labels: &[bool]) -> Self {
        let mut out = RealizedRates {
            true_rate: [0.0; 2],
            biased_rate: [0.0; 2],
            pos_to_neg: [None; 2],
            neg_to_pos: [None; 2],
        };
        for g in SensitiveGroup::BOTH {
            let i = g.index();
            let rows: Vec<(bool, bool)> = examples
                .iter()
                .zip(true_labels)
                .filter(|(e, _)| e.group == g)
                .map(|(e, &t)| (e.label, t))
                .collect();
            let n = rows.len();
            let t1 = rows.iter().filter(|r| r.1).count();
            let y1 = rows.iter().filter(|r| r.0).count();
            let p2n = rows.iter().filter(|r| r.1 && !r.0).count();
            let n2p = rows.iter().filter(|r| !r.1 && r.0).count();
            if n > 0 {
                out.true_rate[i] = t1 as f64 / n as f64;
                out.biased_rate[i] = y1 as f64 / n as f64;
            }
            out.pos_to_neg[i] = (t1 > 0).then(|| p2n as f64 / t1 as f64);
            out.neg_to_pos[i] = (n > t1).then(|| n2p as f64 / (n - t1) as f64);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub true_labels: Vec<bool>,
    pub realized: RealizedRates,
}

/// Biased rate implied by a fair-label rate and flip probabilities.
pub fn implied_biased_rate(true_rate: f64, flips: FlipRates) -> f64 {
    true_rate * (1.0 - flips.pos_to_neg) + (1.0 - true_rate) * flips.neg_to_pos
}

/// Draws `n_per_group` rows for group 0 then group 1.
///
/// Features are Gaussian per group, `ȳ = 1` with probability
/// `σ(⟨x, w⟩ + bias)`, and `y` flips `ȳ` with the group's rates.
pub fn gen_synthetic(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut examples = Vec::with_capacity(2 * spec.n_per_group);
    let mut true_labels = Vec::with_capacity(2 * spec.n_per_group);
    for g in SensitiveGroup::BOTH {
        let mean = &spec.means[g.index()];
        let flips = spec.flips[g.index()];
        for _ in 0..spec.n_per_group {
            let x: Vec<f64> = (0..spec.dim)
                .map(|j| mean[j] + spec.scales[j] * std_normal.sample(&mut rng))
                .collect();
            let z: f64 = x.iter().zip(&spec.weights).map(|(a, b)| a * b).sum::<f64>() + spec.bias;
            let fair = sigmoid(z) > rng.random::<f64>();
            let u: f64 = rng.random();
            let y = if fair {
                u >= flips.pos_to_neg
            } else {
                u < flips.neg_to_pos
            };
            examples.push(LabeledExample::new(x, y, g));
            true_labels.push(fair);
        }
    }
    let realized = RealizedRates::count(&examples, &true_labels);
    let names: Vec<String> = (0..spec.dim).map(|j| format!("x{j}")).collect();
    let dataset = Dataset::new(examples, EncodingMeta::continuous(&names))?;
    Ok(SynthOutput {
        dataset,
        true_labels,
        realized,
    })
}

/// Schema matching [`write_synthetic_csv`] output for `dim` features.
pub fn synthetic_schema(dim: usize) -> Schema {
    let mut columns: Vec<ColumnSpec> = (0..dim)
        .map(|j| ColumnSpec::new(format!("x{j}"), ColumnKind::Continuous))
        .collect();
    columns.push(ColumnSpec::new(
        "s",
        ColumnKind::Sensitive {
            group0: ValueSet::one_of(["0"]),
        },
    ));
    columns.push(ColumnSpec::new(
        "y",
        ColumnKind::Label {
            positive: ValueSet::one_of(["1"]),
        },
    ));
    Schema::new(columns)
}

/// Writes features, `s` and `y` with a header; floats use shortest
/// round-trip formatting.
pub fn write_synthetic_csv<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = dataset.feature_names().to_vec();
    header.push("s".into());
    header.push("y".into());
    w.write_record(&header)?;
    for e in dataset.examples() {
        let mut rec: Vec<String> = e.features.iter().map(|v| format!("{v:?}")).collect();
        rec.push(e.group.index().to_string());
        rec.push(u8::from(e.label).to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::csv::read_csv;

    fn spec(flips: [FlipRates; 2], n: usize, seed: u64) -> SynthSpec {
        SynthSpec {
            n_per_group: n,
            dim: 2,
            means: [vec![-0.5, 0.0], vec![0.5, 0.0]],
            scales: vec![1.0, 1.0],
            weights: vec![2.0, -1.0],
            bias: 0.0,
            flips,
            seed,
        }
    }

    #[test]
    fn no_flips_means_clean_labels() {
        let out = gen_synthetic(&spec([FlipRates::default(); 2], 500, 1)).unwrap();
        for (e, t) in out.dataset.examples().iter().zip(&out.true_labels) {
            assert_eq!(e.label, *t);
        }
    }

    #[test]
    fn flip_fraction_within_binomial_bounds() {
        let flips = [
            FlipRates {
                pos_to_neg: 0.3,
                neg_to_pos: 0.0,
            },
            FlipRates::default(),
        ];
        let out = gen_synthetic(&spec(flips, 20_000, 2)).unwrap();
        let n_pos = out
            .dataset
            .examples()
            .iter()
            .zip(&out.true_labels)
            .filter(|(e, t)| e.group == SensitiveGroup::S0 && **t)
            .count() as f64;
        let observed = out.realized.pos_to_neg[0].unwrap();
        let sd = (0.3 * 0.7 / n_pos).sqrt();
        assert!(
            (observed - 0.3).abs() < 3.0 * sd,
            "{observed} vs 0.3 ± {}",
            3.0 * sd
        );
        assert_eq!(out.realized.pos_to_neg[1], Some(0.0));
    }

    #[test]
    fn biased_rates_match_implied_values() {
        let flips = [
            FlipRates {
                pos_to_neg: 0.4,
                neg_to_pos: 0.05,
            },
            FlipRates {
                pos_to_neg: 0.0,
                neg_to_pos: 0.2,
            },
        ];
        let out = gen_synthetic(&spec(flips, 5000, 3)).unwrap();
        for g in SensitiveGroup::BOTH {
            let i = g.index();
            let t = out.realized.true_rate[i];
            let want = implied_biased_rate(t, flips[i]);
            let sd = (want * (1.0 - want) / 5000.0).sqrt();
            assert!((out.realized.biased_rate[i] - want).abs() < 3.0 * sd);
        }
    }

    #[test]
    fn deterministic() {
        let s = spec(
            [FlipRates {
                pos_to_neg: 0.1,
                neg_to_pos: 0.1,
            }; 2],
            300,
            4,
        );
        assert_eq!(gen_synthetic(&s).unwrap(), gen_synthetic(&s).unwrap());
    }

    #[test]
    fn invalid_spec() {
        let mut s = spec([FlipRates::default(); 2], 10, 1);
        s.flips[0].pos_to_neg = 1.0;
        assert!(matches!(gen_synthetic(&s), Err(Error::InvalidConfig(_))));
        let mut s = spec([FlipRates::default(); 2], 10, 1);
        s.weights.push(1.0);
        assert!(s.validate().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let out = gen_synthetic(&spec(
            [FlipRates {
                pos_to_neg: 0.2,
                neg_to_pos: 0.1,
            }; 2],
            200,
            5,
        ))
        .unwrap();
        let mut buf = Vec::new();
        write_synthetic_csv(&out.dataset, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &synthetic_schema(2), None).unwrap();
        assert_eq!(back.dataset.examples(), out.dataset.examples());
    }
}
