//! Fairness-tunable binary classification through latent target labels.
//!
//! A logistic-regression model predicts a fair label `ȳ`. During training its
//! score is mapped onto the observed, possibly biased label `y` through four
//! debiasing parameters `P(y=1 | ȳ, s)`, chosen from a target positive rate
//! or target TPR/TNR. At test time the model predicts `ȳ` directly.
//!
//! ```
//! use fairlabels::data::{gen_synthetic, FlipRates, SynthSpec};
//! use fairlabels::debias::{build_params, estimate_biased_rates};
//! use fairlabels::model::{train, TrainConfig};
//! use fairlabels::ResolvedTarget;
//!
//! let spec = SynthSpec {
//!     n_per_group: 500,
//!     dim: 2,
//!     means: [vec![0.0, 0.0], vec![0.0, 0.0]],
//!     scales: vec![1.0, 1.0],
//!     weights: vec![3.0, 0.0],
//!     bias: 0.0,
//!     flips: [
//!         FlipRates { pos_to_neg: 0.4, neg_to_pos: 0.0 },
//!         FlipRates { pos_to_neg: 0.0, neg_to_pos: 0.2 },
//!     ],
//!     seed: 7,
//! };
//! let data = gen_synthetic(&spec)?.dataset;
//! let rates = estimate_biased_rates(&data)?;
//! let target = ResolvedTarget::PositiveRate { pr: 0.5 };
//! let debias = build_params(&target, &rates)?;
//! let model = train(&data, &debias, &TrainConfig { epochs: 50, ..TrainConfig::default() })?;
//! assert_eq!(model.params.dim(), 2);
//! # Ok::<(), fairlabels::Error>(())
//! ```

pub mod data;
pub mod debias;
pub mod domain;
mod error;
pub mod metrics;
pub mod model;

pub use domain::{
    partition_by_group, validate_dataset, ColumnTransform, Dataset, DebiasingParams, EncodedColumn,
    EncodingMeta, GroupRates, LabeledExample, PrStrategy, PrTarget, ResolvedTarget, SensitiveGroup,
    TargetSpec, TnrTarget,
};
pub use error::{Error, ErrorClass, Result};

#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $file:literal) => {
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            pub struct $name;
        };
    }
    chapter!(Introduction, "introduction.md");
    chapter!(TargetLabels, "target-labels.md");
    chapter!(Debiasing, "debiasing.md");
    chapter!(Training, "training.md");
    chapter!(Data, "data.md");
    chapter!(Metrics, "metrics.md");
    chapter!(Cli, "cli.md");
    chapter!(Benchmarks, "benchmarks.md");

    #[doc = include_str!("../../../README.md")]
    pub struct Readme;
}
