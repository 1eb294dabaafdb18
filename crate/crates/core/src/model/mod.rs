//! Logistic regression trained on the marginalized likelihood.

mod adam;
mod objective;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use objective::{
    grad_nll, marginalize, nll_loss, score, sigmoid, Gradient, ModelParams, LIKELIHOOD_EPS,
};

use crate::data::Normalizer;
use crate::domain::{Dataset, DebiasingParams, EncodingMeta, SensitiveGroup};
use crate::error::{Error, Result};

/// Version tag written into every serialized model.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Feature name used for the appended sensitive attribute.
pub const SENSITIVE_FEATURE: &str = "s";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    Full,
    Size(usize),
}

impl fmt::Display for BatchSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchSize::Full => f.write_str("full"),
            BatchSize::Size(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for BatchSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(BatchSize::Full);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(BatchSize::Size(n)),
            _ => Err(Error::InvalidConfig(format!(
                "batch size must be `full` or a positive integer, got `{s}`"
            ))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BatchSizeRepr {
    Size(usize),
    Tag(String),
}

impl Serialize for BatchSize {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            BatchSize::Full => BatchSizeRepr::Tag("full".into()),
            BatchSize::Size(n) => BatchSizeRepr::Size(n),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for BatchSize {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        match BatchSizeRepr::deserialize(de)? {
            BatchSizeRepr::Size(0) => Err(serde::de::Error::custom("batch size must be positive")),
            BatchSizeRepr::Size(n) => Ok(BatchSize::Size(n)),
            BatchSizeRepr::Tag(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: BatchSize,
    pub learning_rate: f64,
    pub l2: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub use_s: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            epochs: 500,
            batch_size: BatchSize::Full,
            learning_rate: 1e-2,
            l2: 0.0,
            adam_beta1: adam.beta1,
            adam_beta2: adam.beta2,
            adam_eps: adam.eps,
            seed: 0,
            use_s: false,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.batch_size == BatchSize::Size(0) {
            return bad("batch size must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad(format!("l2 must be nonnegative, got {}", self.l2));
        }
        for (name, b) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} must be in (0, 1), got {b}"));
            }
        }
        if !(self.adam_eps > 0.0 && self.adam_eps.is_finite()) {
            return bad(format!("adam_eps must be positive, got {}", self.adam_eps));
        }
        Ok(())
    }
}

/// A trained classifier together with everything needed to score raw rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub format_version: u32,
    pub params: ModelParams,
    pub debias: DebiasingParams,
    pub normalization: Normalizer,
    /// Model inputs, including the trailing `s` column when `use_s` is set.
    pub feature_names: Vec<String>,
    pub use_s: bool,
    /// Encoding of the raw feature columns the model expects.
    pub encoding: EncodingMeta,
    pub train_config: TrainConfig,
    pub final_train_loss: f64,
    /// Mean minibatch loss of each epoch, evaluated before the updates.
    pub loss_history: Vec<f64>,
}

/// Row-major design matrix with the optional `s` column already appended.
struct Design {
    rows: Vec<f64>,
    dim: usize,
    labels: Vec<bool>,
    groups: Vec<SensitiveGroup>,
}

impl Design {
    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn triple(&self, i: usize) -> (&[f64], bool, SensitiveGroup) {
        (self.row(i), self.labels[i], self.groups[i])
    }
}

fn design(dataset: &Dataset, use_s: bool) -> Design {
    let dim = dataset.dim() + usize::from(use_s);
    let mut rows = Vec::with_capacity(dataset.len() * dim);
    for e in dataset.examples() {
        rows.extend_from_slice(&e.features);
        if use_s {
            rows.push(e.group.as_feature());
        }
    }
    Design {
        rows,
        dim,
        labels: dataset.examples().iter().map(|e| e.label).collect(),
        groups: dataset.examples().iter().map(|e| e.group).collect(),
    }
}

fn input_names(encoding: &EncodingMeta, use_s: bool) -> (Vec<String>, Vec<bool>) {
    let mut names = encoding.feature_names();
    let mut mask = encoding.continuous_mask();
    if use_s {
        names.push(SENSITIVE_FEATURE.to_string());
        mask.push(false);
    }
    (names, mask)
}

/// Trains by epoch-wise Adam on the mean marginal negative log-likelihood.
///
/// Weights start at zero. Minibatches are drawn from a per-epoch shuffle
/// seeded by `config.seed`; full-batch training visits rows in order.
pub fn train(dataset: &Dataset, debias: &DebiasingParams, config: &TrainConfig) -> Result<Model> {
    config.validate()?;
    let mut x = design(dataset, config.use_s);
    let (feature_names, mask) = input_names(dataset.encoding(), config.use_s);
    let normalization = Normalizer::fit((0..x.len()).map(|i| x.row(i)), mask);
    for row in x.rows.chunks_mut(x.dim) {
        normalization.apply_row(row);
    }

    let n = x.len();
    let batch = match config.batch_size {
        BatchSize::Full => n,
        BatchSize::Size(b) => b.min(n),
    };
    let adam = config.adam();
    let mut flat = ModelParams::zeros(x.dim).to_flat();
    let mut grad = vec![0.0; flat.len()];
    let mut state = AdamState::new(flat.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        if batch < n {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(batch) {
            let params = ModelParams::from_flat(&flat);
            let loss = objective::accumulate(
                chunk.iter().map(|&i| x.triple(i)),
                &params,
                debias,
                config.l2,
                Some(&mut grad),
            )?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite { epoch });
            }
            epoch_loss += loss;
            n_batches += 1;
            adam_step(&mut state, &mut flat, &grad, config.learning_rate, &adam);
        }
        loss_history.push(epoch_loss / n_batches as f64);
    }

    let params = ModelParams::from_flat(&flat);
    let final_train_loss = objective::accumulate(
        (0..n).map(|i| x.triple(i)),
        &params,
        debias,
        config.l2,
        None,
    )?;
    if !final_train_loss.is_finite() {
        return Err(Error::NonFinite {
            epoch: config.epochs,
        });
    }
    Ok(Model {
        format_version: MODEL_FORMAT_VERSION,
        params,
        debias: *debias,
        normalization,
        feature_names,
        use_s: config.use_s,
        encoding: dataset.encoding().clone(),
        train_config: config.clone(),
        final_train_loss,
        loss_history,
    })
}

/// Label and fair score `P(ȳ=1 | x)` for one raw feature row.
///
/// The label is positive iff the score is strictly above 0.5.
pub fn predict(model: &Model, x: &[f64], s: Option<SensitiveGroup>) -> Result<(bool, f64)> {
    let raw_dim = model.encoding.width();
    if x.len() != raw_dim {
        return Err(Error::DimMismatch {
            expected: raw_dim,
            found: x.len(),
        });
    }
    let mut row = x.to_vec();
    if model.use_s {
        row.push(s.ok_or(Error::MissingSensitive)?.as_feature());
    }
    model.normalization.apply_row(&mut row);
    let p = score(&model.params, &row)?;
    Ok((p > 0.5, p))
}

impl Model {
    /// Checks that `dataset` has the columns this model was trained on.
    pub fn check_compatible(&self, dataset: &Dataset) -> Result<()> {
        let expected = self.encoding.feature_names();
        if dataset.feature_names() != expected.as_slice() {
            let missing: Vec<_> = expected
                .iter()
                .filter(|n| !dataset.feature_names().contains(n))
                .cloned()
                .collect();
            return Err(Error::FeatureMismatch(format!(
                "model expects {} features, data has {} (missing: {})",
                expected.len(),
                dataset.dim(),
                if missing.is_empty() {
                    "none, order differs".to_string()
                } else {
                    missing.join(", ")
                }
            )));
        }
        Ok(())
    }

    /// Predictions for every example of a compatible dataset.
    pub fn predict_dataset(&self, dataset: &Dataset) -> Result<Vec<(bool, f64)>> {
        self.check_compatible(dataset)?;
        dataset
            .examples()
            .iter()
            .map(|e| predict(self, &e.features, Some(e.group)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::InvalidConfig("model file lacks format_version".into()))?;
        if found != u64::from(MODEL_FORMAT_VERSION) {
            return Err(Error::FormatVersion {
                found: found as u32,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let model: Model = serde_json::from_value(value)?;
        if model.normalization.dim() != model.params.dim()
            || model.feature_names.len() != model.params.dim()
            || model.encoding.width() + usize::from(model.use_s) != model.params.dim()
        {
            return Err(Error::InvalidConfig(
                "model file has inconsistent dimensions".into(),
            ));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::LabeledExample;
    use proptest::prelude::*;
    use rand::Rng;
    use SensitiveGroup::{S0, S1};

    fn toy(n: usize, seed: u64, separable: bool) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|i| {
                let g = if i % 2 == 0 { S0 } else { S1 };
                let b: f64 = rng.random_range(-3.0..3.0);
                let mut a: f64 = rng.random_range(-3.0..3.0);
                if separable {
                    // keep a clear margin around the boundary a + b/2 = 0
                    a += if a + 0.5 * b > 0.0 { 0.5 } else { -0.5 };
                }
                let y = if separable {
                    a + 0.5 * b > 0.0
                } else {
                    rng.random::<f64>() < sigmoid(a - b + 0.3)
                };
                LabeledExample::new(vec![a, b], y, g)
            })
            .collect();
        Dataset::new(rows, EncodingMeta::continuous(&["a", "b"])).unwrap()
    }

    fn accuracy(model: &Model, ds: &Dataset) -> f64 {
        let preds = model.predict_dataset(ds).unwrap();
        let hits = preds
            .iter()
            .zip(ds.examples())
            .filter(|((p, _), e)| *p == e.label)
            .count();
        hits as f64 / ds.len() as f64
    }

    #[test]
    fn default_config() {
        let c = TrainConfig::default();
        assert_eq!(c.epochs, 500);
        assert_eq!(c.batch_size, BatchSize::Full);
        assert_eq!(c.learning_rate, 1e-2);
        assert_eq!((c.adam_beta1, c.adam_beta2, c.adam_eps), (0.9, 0.999, 1e-8));
        c.validate().unwrap();
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = TrainConfig::default();
        for c in [
            TrainConfig {
                epochs: 0,
                ..base.clone()
            },
            TrainConfig {
                learning_rate: 0.0,
                ..base.clone()
            },
            TrainConfig {
                l2: -1.0,
                ..base.clone()
            },
            TrainConfig {
                adam_beta1: 1.0,
                ..base.clone()
            },
            TrainConfig {
                batch_size: BatchSize::Size(0),
                ..base.clone()
            },
        ] {
            assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn batch_size_parsing_and_serde() {
        assert_eq!("full".parse::<BatchSize>().unwrap(), BatchSize::Full);
        assert_eq!("64".parse::<BatchSize>().unwrap(), BatchSize::Size(64));
        assert!("0".parse::<BatchSize>().is_err());
        assert_eq!(serde_json::to_string(&BatchSize::Full).unwrap(), "\"full\"");
        assert_eq!(serde_json::to_string(&BatchSize::Size(7)).unwrap(), "7");
        assert_eq!(
            serde_json::from_str::<BatchSize>("7").unwrap(),
            BatchSize::Size(7)
        );
        assert_eq!(
            serde_json::from_str::<BatchSize>("\"full\"").unwrap(),
            BatchSize::Full
        );
    }

    #[test]
    fn separable_data_is_fit_exactly() {
        let ds = toy(200, 3, true);
        let cfg = TrainConfig {
            epochs: 2000,
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        let model = train(&ds, &DebiasingParams::identity(), &cfg).unwrap();
        assert_eq!(accuracy(&model, &ds), 1.0);
    }

    #[test]
    fn minibatch_training_fits_separable_data() {
        let ds = toy(200, 4, true);
        let cfg = TrainConfig {
            epochs: 300,
            batch_size: BatchSize::Size(16),
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let model = train(&ds, &DebiasingParams::identity(), &cfg).unwrap();
        assert_eq!(model.loss_history.len(), 300);
        assert!(accuracy(&model, &ds) >= 0.99);
    }

    #[test]
    fn small_lr_loss_is_non_increasing() {
        let ds = toy(300, 5, false);
        let debias = DebiasingParams::new(0.1, 0.8, 0.0, 0.9).unwrap();
        let cfg = TrainConfig {
            epochs: 11,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        };
        let model = train(&ds, &debias, &cfg).unwrap();
        // Full batch: entry e+1 is the loss after epoch e's update.
        let mut after: Vec<f64> = model.loss_history[1..].to_vec();
        after.push(model.final_train_loss);
        for w in after.windows(2) {
            assert!(w[1] <= w[0], "{after:?}");
        }
        assert!(model.loss_history[1] <= model.loss_history[0]);
    }

    #[test]
    fn training_is_deterministic() {
        let ds = toy(150, 6, false);
        let debias = DebiasingParams::new(0.05, 0.9, 0.0, 0.7).unwrap();
        for batch_size in [BatchSize::Full, BatchSize::Size(10)] {
            let cfg = TrainConfig {
                epochs: 40,
                batch_size,
                seed: 99,
                use_s: true,
                ..TrainConfig::default()
            };
            let a = train(&ds, &debias, &cfg).unwrap();
            let b = train(&ds, &debias, &cfg).unwrap();
            assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        }
    }

    #[test]
    fn shuffle_seed_matters_for_minibatches() {
        let ds = toy(150, 6, false);
        let cfg = |seed| TrainConfig {
            epochs: 5,
            batch_size: BatchSize::Size(10),
            seed,
            ..TrainConfig::default()
        };
        let a = train(&ds, &DebiasingParams::identity(), &cfg(1)).unwrap();
        let b = train(&ds, &DebiasingParams::identity(), &cfg(2)).unwrap();
        assert_ne!(a.params, b.params);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let ds = toy(120, 7, false);
        let debias = DebiasingParams::new(0.0, 0.73934, 0.07097, 1.0).unwrap();
        let cfg = TrainConfig {
            epochs: 25,
            use_s: true,
            l2: 0.01,
            ..TrainConfig::default()
        };
        let model = train(&ds, &debias, &cfg).unwrap();
        let back = Model::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
        for (a, b) in back.params.weights.iter().zip(&model.params.weights) {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        model.save(&path).unwrap();
        assert_eq!(Model::load(&path).unwrap(), model);
    }

    #[test]
    fn wrong_format_version_rejected() {
        let ds = toy(40, 8, false);
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let model = train(&ds, &DebiasingParams::identity(), &cfg).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&model.to_json().unwrap()).unwrap();
        v["format_version"] = 99.into();
        assert!(matches!(
            Model::from_json(&v.to_string()),
            Err(Error::FormatVersion { found: 99, .. })
        ));
    }

    #[test]
    fn use_s_appends_one_column() {
        let ds = toy(60, 9, false);
        let cfg = TrainConfig {
            epochs: 3,
            use_s: true,
            ..TrainConfig::default()
        };
        let model = train(&ds, &DebiasingParams::identity(), &cfg).unwrap();
        assert_eq!(model.params.dim(), 3);
        assert_eq!(model.feature_names, vec!["a", "b", "s"]);
        assert_eq!(model.normalization.means[2], 0.0);
        assert_eq!(model.normalization.scales[2], 1.0);
        assert!(matches!(
            predict(&model, &[0.0, 0.0], None),
            Err(Error::MissingSensitive)
        ));
        assert!(predict(&model, &[0.0, 0.0], Some(S1)).is_ok());
        assert!(matches!(
            predict(&model, &[0.0], Some(S1)),
            Err(Error::DimMismatch { .. })
        ));
    }

    fn zero_model(dim: usize) -> Model {
        Model {
            format_version: MODEL_FORMAT_VERSION,
            params: ModelParams::zeros(dim),
            debias: DebiasingParams::identity(),
            normalization: Normalizer::fit(std::iter::empty::<&[f64]>(), vec![false; dim]),
            feature_names: (0..dim).map(|i| format!("x{i}")).collect(),
            use_s: false,
            encoding: EncodingMeta::continuous(
                &(0..dim).map(|i| format!("x{i}")).collect::<Vec<_>>(),
            ),
            train_config: TrainConfig::default(),
            final_train_loss: 0.0,
            loss_history: vec![],
        }
    }

    #[test]
    fn zero_model_predicts_negative_at_half() {
        let model = zero_model(3);
        for x in [[0.0, 0.0, 0.0], [1.0, -5.0, 2.0]] {
            assert_eq!(predict(&model, &x, None).unwrap(), (false, 0.5));
        }
    }

    #[test]
    fn feature_mismatch_detected() {
        let model = zero_model(2);
        let ds = toy(20, 1, false);
        assert!(matches!(
            model.predict_dataset(&ds),
            Err(Error::FeatureMismatch(_))
        ));
    }

    proptest! {
        #[test]
        fn score_monotone_in_positive_weight(
            w in prop::collection::vec(-3.0f64..3.0, 3),
            b in -2.0f64..2.0,
            x in prop::collection::vec(-5.0f64..5.0, 3),
            j in 0usize..3,
            bump in 0.0f64..4.0,
        ) {
            let mut model = zero_model(3);
            model.params.weights = w.clone();
            model.params.bias = b;
            let (_, before) = predict(&model, &x, None).unwrap();
            let mut x2 = x.clone();
            x2[j] += bump;
            let (_, after) = predict(&model, &x2, None).unwrap();
            if w[j] >= 0.0 {
                prop_assert!(after >= before);
            } else {
                prop_assert!(after <= before);
            }
        }
    }
}
