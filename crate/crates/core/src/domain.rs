//! Shared domain model: groups, labelled examples, datasets, group rates,
//! debiasing parameters and fairness targets.
//!
//! Every type here is immutable once constructed and validates its
//! invariants at construction time, so downstream code never re-checks them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value of the binary sensitive attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum SensitiveGroup {
    S0,
    S1,
}

impl SensitiveGroup {
    pub const BOTH: [SensitiveGroup; 2] = [SensitiveGroup::S0, SensitiveGroup::S1];

    pub fn index(self) -> usize {
        match self {
            SensitiveGroup::S0 => 0,
            SensitiveGroup::S1 => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(SensitiveGroup::S0),
            1 => Some(SensitiveGroup::S1),
            _ => None,
        }
    }

    /// The group as a 0/1 feature value.
    pub fn as_feature(self) -> f64 {
        self.index() as f64
    }
}

impl From<SensitiveGroup> for u8 {
    fn from(group: SensitiveGroup) -> u8 {
        group.index() as u8
    }
}

impl TryFrom<u8> for SensitiveGroup {
    type Error = String;

    fn try_from(value: u8) -> std::result::Result<Self, Self::Error> {
        SensitiveGroup::from_index(value as usize)
            .ok_or_else(|| format!("sensitive group must be 0 or 1, got {value}"))
    }
}

impl fmt::Display for SensitiveGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s={}", self.index())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub features: Vec<f64>,
    pub label: bool,
    pub group: SensitiveGroup,
}

impl LabeledExample {
    pub fn new(features: Vec<f64>, label: bool, group: SensitiveGroup) -> Self {
        LabeledExample {
            features,
            label,
            group,
        }
    }
}

/// How one source column was turned into model features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "transform", rename_all = "snake_case")]
pub enum ColumnTransform {
    /// One real-valued feature, z-scored during training.
    Continuous,
    /// One indicator per category, in first-appearance order.
    OneHot { categories: Vec<String> },
    /// A single 0/1 indicator, left unscaled.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub source: String,
    #[serde(flatten)]
    pub transform: ColumnTransform,
}

impl EncodedColumn {
    pub fn width(&self) -> usize {
        match &self.transform {
            ColumnTransform::Continuous | ColumnTransform::Binary => 1,
            ColumnTransform::OneHot { categories } => categories.len(),
        }
    }
}

/// Per-column transform description for a dataset's feature vector.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EncodingMeta {
    pub columns: Vec<EncodedColumn>,
}

impl EncodingMeta {
    /// Encoding where every feature is a continuous column with the given name.
    pub fn continuous<S: AsRef<str>>(names: &[S]) -> Self {
        EncodingMeta {
            columns: names
                .iter()
                .map(|n| EncodedColumn {
                    source: n.as_ref().to_owned(),
                    transform: ColumnTransform::Continuous,
                })
                .collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.columns.iter().map(EncodedColumn::width).sum()
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.width());
        for col in &self.columns {
            match &col.transform {
                ColumnTransform::Continuous | ColumnTransform::Binary => {
                    names.push(col.source.clone())
                }
                ColumnTransform::OneHot { categories } => {
                    names.extend(categories.iter().map(|c| format!("{}={}", col.source, c)))
                }
            }
        }
        names
    }

    /// `true` for every output feature that gets z-scored.
    pub fn continuous_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.width());
        for col in &self.columns {
            let cont = matches!(col.transform, ColumnTransform::Continuous);
            mask.extend(std::iter::repeat_n(cont, col.width()));
        }
        mask
    }
}

/// A validated training or evaluation set.
///
/// Construction fails unless both groups are present, each group has both
/// label values, and every feature vector has the declared dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<LabeledExample>,
    feature_names: Vec<String>,
    encoding: EncodingMeta,
}

impl Dataset {
    pub fn new(examples: Vec<LabeledExample>, encoding: EncodingMeta) -> Result<Self> {
        let feature_names = encoding.feature_names();
        validate_examples(&examples, feature_names.len())?;
        Ok(Dataset {
            examples,
            feature_names,
            encoding,
        })
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<LabeledExample> {
        self.examples
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn encoding(&self) -> &EncodingMeta {
        &self.encoding
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Same encoding, different rows. Validates the new rows.
    pub fn with_examples(&self, examples: Vec<LabeledExample>) -> Result<Self> {
        Dataset::new(examples, self.encoding.clone())
    }
}

/// Checks the dataset invariants on raw examples.
pub fn validate_examples(examples: &[LabeledExample], dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::DimMismatch {
            expected: 1,
            found: 0,
        });
    }
    if let Some(bad) = examples.iter().find(|e| e.features.len() != dim) {
        return Err(Error::DimMismatch {
            expected: dim,
            found: bad.features.len(),
        });
    }
    // [group][label]
    let mut seen = [[false; 2]; 2];
    let mut count = [0usize; 2];
    for e in examples {
        seen[e.group.index()][e.label as usize] = true;
        count[e.group.index()] += 1;
    }
    for g in SensitiveGroup::BOTH {
        if count[g.index()] == 0 {
            return Err(Error::EmptyGroup(g));
        }
    }
    for g in SensitiveGroup::BOTH {
        if !(seen[g.index()][0] && seen[g.index()][1]) {
            return Err(Error::DegenerateLabels(g));
        }
    }
    Ok(())
}

/// Validates examples against an encoding and wraps them into a [`Dataset`].
pub fn validate_dataset(examples: Vec<LabeledExample>, encoding: EncodingMeta) -> Result<Dataset> {
    Dataset::new(examples, encoding)
}

/// Splits examples into (group 0, group 1), keeping the input order within
/// each group. Accepts unvalidated input.
pub fn partition_by_group(
    examples: &[LabeledExample],
) -> (Vec<LabeledExample>, Vec<LabeledExample>) {
    examples
        .iter()
        .cloned()
        .partition(|e| e.group == SensitiveGroup::S0)
}

/// Empirical label rates `P(y=1 | s=i)` of the biased training labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub p0: f64,
    pub p1: f64,
    pub n0: usize,
    pub n1: usize,
}

impl GroupRates {
    pub fn new(p0: f64, p1: f64, n0: usize, n1: usize) -> Result<Self> {
        for (g, p, n) in [(SensitiveGroup::S0, p0, n0), (SensitiveGroup::S1, p1, n1)] {
            if n == 0 {
                return Err(Error::EmptyGroup(g));
            }
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::DegenerateLabels(g));
            }
        }
        Ok(GroupRates { p0, p1, n0, n1 })
    }

    pub fn rate(&self, group: SensitiveGroup) -> f64 {
        match group {
            SensitiveGroup::S0 => self.p0,
            SensitiveGroup::S1 => self.p1,
        }
    }

    pub fn count(&self, group: SensitiveGroup) -> usize {
        match group {
            SensitiveGroup::S0 => self.n0,
            SensitiveGroup::S1 => self.n1,
        }
    }
}

/// The four conditionals `d[s][ȳ] = P(y=1 | ȳ, s)` that map a fair score to
/// the likelihood of an observed label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDebiasingParams")]
pub struct DebiasingParams {
    d_y0_s0: f64,
    d_y1_s0: f64,
    d_y0_s1: f64,
    d_y1_s1: f64,
}

#[derive(Deserialize)]
struct RawDebiasingParams {
    d_y0_s0: f64,
    d_y1_s0: f64,
    d_y0_s1: f64,
    d_y1_s1: f64,
}

impl TryFrom<RawDebiasingParams> for DebiasingParams {
    type Error = Error;

    fn try_from(raw: RawDebiasingParams) -> Result<Self> {
        DebiasingParams::new(raw.d_y0_s0, raw.d_y1_s0, raw.d_y0_s1, raw.d_y1_s1)
    }
}

impl DebiasingParams {
    pub fn new(d_y0_s0: f64, d_y1_s0: f64, d_y0_s1: f64, d_y1_s1: f64) -> Result<Self> {
        let check = |name: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::TargetOutOfRange {
                    name,
                    value: v,
                    range: "[0, 1]",
                })
            }
        };
        check("d_y0_s0", d_y0_s0)?;
        check("d_y1_s0", d_y1_s0)?;
        check("d_y0_s1", d_y0_s1)?;
        check("d_y1_s1", d_y1_s1)?;
        for (g, d0, d1) in [
            (SensitiveGroup::S0, d_y0_s0, d_y1_s0),
            (SensitiveGroup::S1, d_y0_s1, d_y1_s1),
        ] {
            if d1 < d0 {
                return Err(Error::DegenerateTarget {
                    reason: format!("P(y=1|ȳ=1,{g}) = {d1} is below P(y=1|ȳ=0,{g}) = {d0}"),
                });
            }
        }
        Ok(DebiasingParams {
            d_y0_s0,
            d_y1_s0,
            d_y0_s1,
            d_y1_s1,
        })
    }

    /// Per-group `(d_y0, d_y1)` pairs, indexed by group.
    pub fn from_groups(groups: [(f64, f64); 2]) -> Result<Self> {
        DebiasingParams::new(groups[0].0, groups[0].1, groups[1].0, groups[1].1)
    }

    /// `ȳ = y` in both groups: the ordinary, fairness-unaware likelihood.
    pub fn identity() -> Self {
        DebiasingParams {
            d_y0_s0: 0.0,
            d_y1_s0: 1.0,
            d_y0_s1: 0.0,
            d_y1_s1: 1.0,
        }
    }

    /// `P(y=1 | ȳ=0, s)`.
    pub fn d_y0(&self, group: SensitiveGroup) -> f64 {
        match group {
            SensitiveGroup::S0 => self.d_y0_s0,
            SensitiveGroup::S1 => self.d_y0_s1,
        }
    }

    /// `P(y=1 | ȳ=1, s)`.
    pub fn d_y1(&self, group: SensitiveGroup) -> f64 {
        match group {
            SensitiveGroup::S0 => self.d_y1_s0,
            SensitiveGroup::S1 => self.d_y1_s1,
        }
    }

    pub fn group(&self, group: SensitiveGroup) -> (f64, f64) {
        (self.d_y0(group), self.d_y1(group))
    }

    /// Slope `m_s = d_y1 - d_y0` of the affine score mapping.
    pub fn slope(&self, group: SensitiveGroup) -> f64 {
        self.d_y1(group) - self.d_y0(group)
    }

    /// Intercept `b_s = d_y0` of the affine score mapping.
    pub fn intercept(&self, group: SensitiveGroup) -> f64 {
        self.d_y0(group)
    }

    pub fn is_identity_for(&self, group: SensitiveGroup) -> bool {
        self.d_y0(group) == 0.0 && self.d_y1(group) == 1.0
    }
}

/// Named strategy for picking a shared positive-rate target from the two
/// biased group rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrStrategy {
    Avg,
    Min,
    Max,
}

impl fmt::Display for PrStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrStrategy::Avg => "avg",
            PrStrategy::Min => "min",
            PrStrategy::Max => "max",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrTarget {
    Rate(f64),
    Strategy(PrStrategy),
}

impl FromStr for PrTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "avg" | "mean" => Ok(PrTarget::Strategy(PrStrategy::Avg)),
            "min" => Ok(PrTarget::Strategy(PrStrategy::Min)),
            "max" => Ok(PrTarget::Strategy(PrStrategy::Max)),
            other => {
                let v: f64 = other.parse().map_err(|_| {
                    Error::InvalidConfig(format!(
                        "positive-rate target must be a number or avg|min|max, got `{s}`"
                    ))
                })?;
                check_open_unit("pr_target", v)?;
                Ok(PrTarget::Rate(v))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TnrTarget {
    Rate(f64),
    /// Minimum of the per-group TNRs a baseline model achieves.
    Auto,
}

impl FromStr for TnrTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("auto") {
            return Ok(TnrTarget::Auto);
        }
        let v: f64 = s.trim().parse().map_err(|_| {
            Error::InvalidConfig(format!("TNR target must be a number or `auto`, got `{s}`"))
        })?;
        check_half_open_unit("tnr_target", v)?;
        Ok(TnrTarget::Rate(v))
    }
}

/// What the user asked for, possibly still containing strategy tags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    None,
    PositiveRate { pr: PrTarget },
    TprTnr { tpr: f64, tnr: TnrTarget },
}

impl TargetSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TargetSpec::None => Ok(()),
            TargetSpec::PositiveRate { pr } => match pr {
                PrTarget::Rate(v) => check_open_unit("pr_target", v),
                PrTarget::Strategy(_) => Ok(()),
            },
            TargetSpec::TprTnr { tpr, tnr } => {
                check_half_open_unit("tpr_target", tpr)?;
                match tnr {
                    TnrTarget::Rate(v) => check_half_open_unit("tnr_target", v),
                    TnrTarget::Auto => Ok(()),
                }
            }
        }
    }

    pub fn needs_tnr_selection(&self) -> bool {
        matches!(
            self,
            TargetSpec::TprTnr {
                tnr: TnrTarget::Auto,
                ..
            }
        )
    }
}

/// A target with every strategy tag and `auto` replaced by a number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResolvedTarget {
    None,
    PositiveRate { pr: f64 },
    TprTnr { tpr: f64, tnr: f64 },
}

pub(crate) fn check_open_unit(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::TargetOutOfRange {
            name,
            value: v,
            range: "(0, 1)",
        })
    }
}

pub(crate) fn check_half_open_unit(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::TargetOutOfRange {
            name,
            value: v,
            range: "(0, 1]",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use SensitiveGroup::{S0, S1};

    fn ex(label: bool, group: SensitiveGroup) -> LabeledExample {
        LabeledExample::new(vec![0.0], label, group)
    }

    fn enc() -> EncodingMeta {
        EncodingMeta::continuous(&["x"])
    }

    #[test]
    fn minimal_valid_dataset() {
        let rows = vec![ex(true, S0), ex(false, S0), ex(true, S1), ex(false, S1)];
        let ds = validate_dataset(rows, enc()).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.dim(), 1);
    }

    #[test]
    fn single_group_is_rejected() {
        let rows = vec![ex(true, S0), ex(false, S0)];
        assert!(matches!(
            validate_dataset(rows, enc()),
            Err(Error::EmptyGroup(S1))
        ));
    }

    #[test]
    fn single_label_group_is_rejected() {
        let rows = vec![ex(true, S0), ex(false, S0), ex(true, S1), ex(true, S1)];
        assert!(matches!(
            validate_dataset(rows, enc()),
            Err(Error::DegenerateLabels(S1))
        ));
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let mut rows = vec![ex(true, S0), ex(false, S0), ex(true, S1), ex(false, S1)];
        rows[2].features.push(1.0);
        assert!(matches!(
            validate_dataset(rows, enc()),
            Err(Error::DimMismatch {
                expected: 1,
                found: 2
            })
        ));
    }

    #[test]
    fn partition_examples() {
        let rows = vec![
            LabeledExample::new(vec![1.0], true, S0),
            LabeledExample::new(vec![2.0], false, S1),
            LabeledExample::new(vec![3.0], false, S0),
        ];
        let (g0, g1) = partition_by_group(&rows);
        assert_eq!(g0, vec![rows[0].clone(), rows[2].clone()]);
        assert_eq!(g1, vec![rows[1].clone()]);

        let only_s1 = vec![ex(true, S1), ex(false, S1)];
        let (g0, g1) = partition_by_group(&only_s1);
        assert!(g0.is_empty());
        assert_eq!(g1.len(), 2);

        let (g0, g1) = partition_by_group(&[]);
        assert!(g0.is_empty() && g1.is_empty());
    }

    #[test]
    fn group_rates_reject_degenerate() {
        assert!(GroupRates::new(0.2, 0.4, 10, 10).is_ok());
        assert!(matches!(
            GroupRates::new(0.0, 0.4, 10, 10),
            Err(Error::DegenerateLabels(S0))
        ));
        assert!(matches!(
            GroupRates::new(0.2, 1.0, 10, 10),
            Err(Error::DegenerateLabels(S1))
        ));
        assert!(matches!(
            GroupRates::new(0.2, 0.5, 10, 0),
            Err(Error::EmptyGroup(S1))
        ));
    }

    #[test]
    fn debiasing_params_invariants() {
        assert!(DebiasingParams::new(0.0, 1.0, 0.1, 0.9).is_ok());
        assert!(DebiasingParams::new(-0.1, 1.0, 0.0, 1.0).is_err());
        assert!(DebiasingParams::new(0.0, 1.2, 0.0, 1.0).is_err());
        // d_y1 below d_y0 within a group
        assert!(DebiasingParams::new(0.6, 0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn debiasing_params_serde_uses_named_fields() {
        let p = DebiasingParams::new(0.0, 0.739336492891, 0.070975918884, 1.0).unwrap();
        let json = serde_json::to_value(p).unwrap();
        for key in ["d_y0_s0", "d_y1_s0", "d_y0_s1", "d_y1_s1"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let back: DebiasingParams = serde_json::from_value(json).unwrap();
        assert_eq!(back, p);

        let bad =
            serde_json::json!({"d_y0_s0": 0.5, "d_y1_s0": 0.2, "d_y0_s1": 0.0, "d_y1_s1": 1.0});
        assert!(serde_json::from_value::<DebiasingParams>(bad).is_err());
    }

    #[test]
    fn target_parsing() {
        assert_eq!(
            "avg".parse::<PrTarget>().unwrap(),
            PrTarget::Strategy(PrStrategy::Avg)
        );
        assert_eq!("0.25".parse::<PrTarget>().unwrap(), PrTarget::Rate(0.25));
        assert!("1.0".parse::<PrTarget>().is_err());
        assert!("median".parse::<PrTarget>().is_err());
        assert_eq!("auto".parse::<TnrTarget>().unwrap(), TnrTarget::Auto);
        assert_eq!("1".parse::<TnrTarget>().unwrap(), TnrTarget::Rate(1.0));
        assert!("0".parse::<TnrTarget>().is_err());
    }

    #[test]
    fn target_spec_validation() {
        assert!(TargetSpec::TprTnr {
            tpr: 1.0,
            tnr: TnrTarget::Auto
        }
        .validate()
        .is_ok());
        assert!(TargetSpec::TprTnr {
            tpr: 0.0,
            tnr: TnrTarget::Rate(0.8)
        }
        .validate()
        .is_err());
        assert!(TargetSpec::PositiveRate {
            pr: PrTarget::Rate(0.0)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn one_hot_feature_names_and_mask() {
        let enc = EncodingMeta {
            columns: vec![
                EncodedColumn {
                    source: "age".into(),
                    transform: ColumnTransform::Continuous,
                },
                EncodedColumn {
                    source: "job".into(),
                    transform: ColumnTransform::OneHot {
                        categories: vec!["a".into(), "b".into()],
                    },
                },
            ],
        };
        assert_eq!(enc.feature_names(), vec!["age", "job=a", "job=b"]);
        assert_eq!(enc.continuous_mask(), vec![true, false, false]);
        assert_eq!(enc.width(), 3);
    }

    fn arb_example() -> impl Strategy<Value = LabeledExample> {
        (any::<bool>(), any::<bool>(), -10.0..10.0f64)
            .prop_map(|(y, s, x)| LabeledExample::new(vec![x], y, if s { S1 } else { S0 }))
    }

    proptest! {
        #[test]
        fn partition_preserves_members_and_purity(rows in prop::collection::vec(arb_example(), 0..40)) {
            let (g0, g1) = partition_by_group(&rows);
            prop_assert_eq!(g0.len() + g1.len(), rows.len());
            prop_assert!(g0.iter().all(|e| e.group == S0));
            prop_assert!(g1.iter().all(|e| e.group == S1));
            // order-stable: each side is a subsequence of the input
            let expect0: Vec<_> = rows.iter().filter(|e| e.group == S0).cloned().collect();
            let expect1: Vec<_> = rows.iter().filter(|e| e.group == S1).cloned().collect();
            prop_assert_eq!(g0, expect0);
            prop_assert_eq!(g1, expect1);
        }

        #[test]
        fn slope_and_intercept_accessors(d0 in 0.0..=1.0f64, extra in 0.0..=1.0f64) {
            let d1 = d0 + (1.0 - d0) * extra;
            let p = DebiasingParams::new(d0, d1, d0, d1).unwrap();
            for g in SensitiveGroup::BOTH {
                prop_assert_eq!(p.intercept(g), p.d_y0(g));
                prop_assert_eq!(p.slope(g), p.d_y1(g) - p.d_y0(g));
                // the subtraction may round by half an ulp of 1.0
                prop_assert!((p.slope(g) + p.intercept(g) - p.d_y1(g)).abs() <= f64::EPSILON);
            }
        }
    }
}
