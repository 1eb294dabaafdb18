use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_FORMAT_VERSION: u32 = 1;

/// A set of raw string values, given either positively or as a complement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueSet {
    OneOf(Vec<String>),
    NoneOf(Vec<String>),
}

impl ValueSet {
    pub fn one_of<S: Into<String>>(values: impl IntoIterator<Item = S>) -> Self {
        ValueSet::OneOf(values.into_iter().map(Into::into).collect())
    }

    pub fn none_of<S: Into<String>>(values: impl IntoIterator<Item = S>) -> Self {
        ValueSet::NoneOf(values.into_iter().map(Into::into).collect())
    }

    pub fn contains(&self, value: &str) -> bool {
        match self {
            ValueSet::OneOf(v) => v.iter().any(|x| x == value),
            ValueSet::NoneOf(v) => !v.iter().any(|x| x == value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Categorical,
    /// Rows whose value is in `positive` get `y = 1`.
    Label {
        positive: ValueSet,
    },
    /// Rows whose value is in `group0` get `s = 0`.
    Sensitive {
        group0: ValueSet,
    },
    Drop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        ColumnSpec {
            name: name.into(),
            kind,
        }
    }

    pub fn is_feature(&self) -> bool {
        matches!(self.kind, ColumnKind::Continuous | ColumnKind::Categorical)
    }
}

/// Row filter applied to raw values before encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RowFilter {
    /// Keep rows whose value parses as a number in `[min, max]`.
    Range { column: String, min: f64, max: f64 },
    /// Keep rows whose value is in the set.
    Keep { column: String, values: ValueSet },
}

impl RowFilter {
    pub fn column(&self) -> &str {
        match self {
            RowFilter::Range { column, .. } | RowFilter::Keep { column, .. } => column,
        }
    }

    pub fn keeps(&self, value: &str) -> bool {
        match self {
            RowFilter::Range { min, max, .. } => value
                .parse::<f64>()
                .map(|v| v >= *min && v <= *max)
                .unwrap_or(false),
            RowFilter::Keep { values, .. } => values.contains(value),
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_missing() -> String {
    "?".to_string()
}

/// Column layout of a CSV file.
///
/// With a header, columns are matched by name and unlisted columns are
/// ignored. Without one, `columns` must list every column in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub format_version: u32,
    pub columns: Vec<ColumnSpec>,
    /// Fields equal to this token (or empty) mark a row as missing.
    #[serde(default = "default_missing")]
    pub missing_token: String,
    #[serde(default = "default_true")]
    pub has_header: bool,
    #[serde(default)]
    pub filters: Vec<RowFilter>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Self {
        Schema {
            format_version: SCHEMA_FORMAT_VERSION,
            columns,
            missing_token: default_missing(),
            has_header: true,
            filters: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != SCHEMA_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: self.format_version,
                expected: SCHEMA_FORMAT_VERSION,
            });
        }
        let count = |f: fn(&ColumnKind) -> bool| self.columns.iter().filter(|c| f(&c.kind)).count();
        let labels = count(|k| matches!(k, ColumnKind::Label { .. }));
        let sensitive = count(|k| matches!(k, ColumnKind::Sensitive { .. }));
        let features = self.columns.iter().filter(|c| c.is_feature()).count();
        if labels != 1 {
            return Err(Error::SchemaMismatch(format!(
                "expected exactly one label column, found {labels}"
            )));
        }
        if sensitive != 1 {
            return Err(Error::SchemaMismatch(format!(
                "expected exactly one sensitive column, found {sensitive}"
            )));
        }
        if features == 0 {
            return Err(Error::SchemaMismatch("no feature columns".into()));
        }
        for (i, c) in self.columns.iter().enumerate() {
            if self.columns[..i].iter().any(|d| d.name == c.name) {
                return Err(Error::SchemaMismatch(format!(
                    "column `{}` listed twice",
                    c.name
                )));
            }
        }
        if !self.has_header {
            for f in &self.filters {
                if !self.columns.iter().any(|c| c.name == f.column()) {
                    return Err(Error::SchemaMismatch(format!(
                        "filter refers to unknown column `{}`",
                        f.column()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn label_column(&self) -> Option<&ColumnSpec> {
        self.columns
            .iter()
            .find(|c| matches!(c.kind, ColumnKind::Label { .. }))
    }

    pub fn sensitive_column(&self) -> Option<&ColumnSpec> {
        self.columns
            .iter()
            .find(|c| matches!(c.kind, ColumnKind::Sensitive { .. }))
    }

    pub fn feature_columns(&self) -> impl Iterator<Item = &ColumnSpec> {
        self.columns.iter().filter(|c| c.is_feature())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: Schema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    Adult,
    Compas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitiveAttr {
    Race,
    Gender,
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Recipe::Adult => "adult",
            Recipe::Compas => "compas",
        })
    }
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adult" => Ok(Recipe::Adult),
            "compas" | "propublica" => Ok(Recipe::Compas),
            _ => Err(Error::InvalidConfig(format!("unknown recipe `{s}`"))),
        }
    }
}

impl fmt::Display for SensitiveAttr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SensitiveAttr::Race => "race",
            SensitiveAttr::Gender => "gender",
        })
    }
}

impl FromStr for SensitiveAttr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "race" => Ok(SensitiveAttr::Race),
            "gender" | "sex" => Ok(SensitiveAttr::Gender),
            _ => Err(Error::InvalidConfig(format!(
                "unknown sensitive attribute `{s}`"
            ))),
        }
    }
}

impl Recipe {
    pub fn schema(self, sensitive: SensitiveAttr) -> Schema {
        match self {
            Recipe::Adult => adult_recipe(sensitive),
            Recipe::Compas => propublica_recipe(sensitive),
        }
    }

    /// L2 coefficient shipped as the default for this dataset.
    pub fn default_l2(self) -> f64 {
        match self {
            Recipe::Adult => 0.00035,
            Recipe::Compas => 0.0024,
        }
    }
}

/// UCI Adult (`adult.data`, no header).
///
/// Twelve raw features: every column except income, race and sex. Race
/// maps non-white to group 0; gender maps female to group 0. The attribute
/// not used as `s` is dropped.
pub fn adult_recipe(sensitive: SensitiveAttr) -> Schema {
    use ColumnKind::*;
    let (race, sex) = match sensitive {
        SensitiveAttr::Race => (
            Sensitive {
                group0: ValueSet::none_of(["White"]),
            },
            Drop,
        ),
        SensitiveAttr::Gender => (
            Drop,
            Sensitive {
                group0: ValueSet::one_of(["Female"]),
            },
        ),
    };
    let columns = vec![
        ColumnSpec::new("age", Continuous),
        ColumnSpec::new("workclass", Categorical),
        ColumnSpec::new("fnlwgt", Continuous),
        ColumnSpec::new("education", Categorical),
        ColumnSpec::new("education-num", Continuous),
        ColumnSpec::new("marital-status", Categorical),
        ColumnSpec::new("occupation", Categorical),
        ColumnSpec::new("relationship", Categorical),
        ColumnSpec::new("race", race),
        ColumnSpec::new("sex", sex),
        ColumnSpec::new("capital-gain", Continuous),
        ColumnSpec::new("capital-loss", Continuous),
        ColumnSpec::new("hours-per-week", Continuous),
        ColumnSpec::new("native-country", Categorical),
        ColumnSpec::new(
            "income",
            Label {
                positive: ValueSet::one_of([">50K", ">50K."]),
            },
        ),
    ];
    Schema {
        has_header: false,
        ..Schema::new(columns)
    }
}

/// ProPublica `compas-scores-two-years.csv`.
///
/// Label is `two_year_recid`. Race maps African-American to group 0;
/// gender maps female to group 0. Rows are filtered the way the original
/// analysis did: screening within 30 days of arrest, known recidivism
/// status, no ordinary traffic offences and a valid score.
pub fn propublica_recipe(sensitive: SensitiveAttr) -> Schema {
    use ColumnKind::*;
    let (race, sex) = match sensitive {
        SensitiveAttr::Race => (
            Sensitive {
                group0: ValueSet::one_of(["African-American"]),
            },
            Drop,
        ),
        SensitiveAttr::Gender => (
            Drop,
            Sensitive {
                group0: ValueSet::one_of(["Female"]),
            },
        ),
    };
    let columns = vec![
        ColumnSpec::new("sex", sex),
        ColumnSpec::new("age", Continuous),
        ColumnSpec::new("age_cat", Categorical),
        ColumnSpec::new("race", race),
        ColumnSpec::new("juv_fel_count", Continuous),
        ColumnSpec::new("juv_misd_count", Continuous),
        ColumnSpec::new("juv_other_count", Continuous),
        ColumnSpec::new("priors_count", Continuous),
        ColumnSpec::new("c_charge_degree", Categorical),
        ColumnSpec::new(
            "two_year_recid",
            Label {
                positive: ValueSet::one_of(["1"]),
            },
        ),
    ];
    Schema {
        filters: vec![
            RowFilter::Range {
                column: "days_b_screening_arrest".into(),
                min: -30.0,
                max: 30.0,
            },
            RowFilter::Keep {
                column: "is_recid".into(),
                values: ValueSet::none_of(["-1"]),
            },
            RowFilter::Keep {
                column: "c_charge_degree".into(),
                values: ValueSet::none_of(["O"]),
            },
            RowFilter::Keep {
                column: "score_text".into(),
                values: ValueSet::none_of(["N/A"]),
            },
        ],
        missing_token: String::new(),
        ..Schema::new(columns)
    }
}
