use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, Schema};
use crate::domain::{
    ColumnTransform, Dataset, EncodedColumn, EncodingMeta, LabeledExample, SensitiveGroup,
};
use crate::error::{Error, Result};

/// Row accounting for one load.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub dropped_missing: usize,
    pub dropped_filtered: usize,
    pub kept: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub dataset: Dataset,
    pub report: LoadReport,
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Loaded> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, None)
}

/// Loads with a fixed encoding, e.g. the one stored in a trained model.
/// Categories absent from `encoding` encode as all zeros.
pub fn load_csv_with_encoding(
    path: impl AsRef<Path>,
    schema: &Schema,
    encoding: &EncodingMeta,
) -> Result<Loaded> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, Some(encoding))
}

/// Trimmed column names from the first row of a CSV file.
pub fn csv_header(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    Ok(rdr.headers()?.iter().map(str::to_string).collect())
}

struct Resolved {
    features: Vec<(usize, String, bool)>,
    label: usize,
    sensitive: usize,
    filters: Vec<usize>,
}

fn resolve(schema: &Schema, header: Option<&csv::StringRecord>) -> Result<Resolved> {
    let index_of = |name: &str| -> Result<usize> {
        match header {
            Some(h) => h.iter().position(|c| c == name).ok_or_else(|| {
                Error::SchemaMismatch(format!("column `{name}` not found in header"))
            }),
            None => schema
                .columns
                .iter()
                .position(|c| c.name == name)
                .ok_or_else(|| Error::SchemaMismatch(format!("unknown column `{name}`"))),
        }
    };
    let mut features = Vec::new();
    let mut label = None;
    let mut sensitive = None;
    for col in &schema.columns {
        match &col.kind {
            ColumnKind::Continuous => features.push((index_of(&col.name)?, col.name.clone(), true)),
            ColumnKind::Categorical => {
                features.push((index_of(&col.name)?, col.name.clone(), false))
            }
            ColumnKind::Label { .. } => label = Some(index_of(&col.name)?),
            ColumnKind::Sensitive { .. } => sensitive = Some(index_of(&col.name)?),
            ColumnKind::Drop => {}
        }
    }
    let filters = schema
        .filters
        .iter()
        .map(|f| index_of(f.column()))
        .collect::<Result<_>>()?;
    Ok(Resolved {
        features,
        label: label.ok_or_else(|| Error::SchemaMismatch("no label column".into()))?,
        sensitive: sensitive.ok_or_else(|| Error::SchemaMismatch("no sensitive column".into()))?,
        filters,
    })
}

/// Parses CSV text according to `schema`.
///
/// Fields are trimmed. Rows failing a filter, or with the missing token
/// (or an empty field) in any used column, are dropped and counted.
pub fn read_csv<R: Read>(
    reader: R,
    schema: &Schema,
    encoding: Option<&EncodingMeta>,
) -> Result<Loaded> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = if schema.has_header {
        Some(rdr.headers()?.clone())
    } else {
        None
    };
    let cols = resolve(schema, header.as_ref())?;
    let (label_set, group0_set) = match (
        &schema.label_column().map(|c| &c.kind),
        &schema.sensitive_column().map(|c| &c.kind),
    ) {
        (Some(ColumnKind::Label { positive }), Some(ColumnKind::Sensitive { group0 })) => {
            (positive, group0)
        }
        _ => unreachable!("validated schema"),
    };
    let used: Vec<usize> = cols
        .features
        .iter()
        .map(|f| f.0)
        .chain([cols.label, cols.sensitive])
        .collect();

    let mut report = LoadReport::default();
    let mut kept: Vec<(Vec<String>, bool, SensitiveGroup, usize)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        report.rows_read += 1;
        if !schema.has_header && rec.len() != schema.columns.len() {
            return Err(Error::SchemaMismatch(format!(
                "row {row} has {} fields, schema lists {}",
                rec.len(),
                schema.columns.len()
            )));
        }
        let field = |j: usize| rec.get(j).unwrap_or("");
        if schema
            .filters
            .iter()
            .zip(&cols.filters)
            .any(|(f, &j)| !f.keeps(field(j)))
        {
            report.dropped_filtered += 1;
            continue;
        }
        if used.iter().any(|&j| {
            let v = field(j);
            v.is_empty() || v == schema.missing_token
        }) {
            report.dropped_missing += 1;
            continue;
        }
        let raw = cols
            .features
            .iter()
            .map(|f| field(f.0).to_string())
            .collect();
        let y = label_set.contains(field(cols.label));
        let s = if group0_set.contains(field(cols.sensitive)) {
            SensitiveGroup::S0
        } else {
            SensitiveGroup::S1
        };
        kept.push((raw, y, s, row));
    }
    report.kept = kept.len();
    if kept.is_empty() {
        return Err(Error::EmptyAfterFiltering);
    }

    let encoding = match encoding {
        Some(enc) => {
            let want: Vec<&str> = cols.features.iter().map(|f| f.1.as_str()).collect();
            let have: Vec<&str> = enc.columns.iter().map(|c| c.source.as_str()).collect();
            if want != have {
                return Err(Error::FeatureMismatch(format!(
                    "schema features [{}] differ from expected [{}]",
                    want.join(", "),
                    have.join(", ")
                )));
            }
            enc.clone()
        }
        None => EncodingMeta {
            columns: cols
                .features
                .iter()
                .enumerate()
                .map(|(k, (_, name, continuous))| EncodedColumn {
                    source: name.clone(),
                    transform: if *continuous {
                        ColumnTransform::Continuous
                    } else {
                        let mut categories: Vec<String> = Vec::new();
                        for (raw, ..) in &kept {
                            if !categories.contains(&raw[k]) {
                                categories.push(raw[k].clone());
                            }
                        }
                        ColumnTransform::OneHot { categories }
                    },
                })
                .collect(),
        },
    };

    let width = encoding.width();
    let mut examples = Vec::with_capacity(kept.len());
    for (raw, y, s, row) in kept {
        let mut x = Vec::with_capacity(width);
        for (col, value) in encoding.columns.iter().zip(&raw) {
            match &col.transform {
                ColumnTransform::Continuous => {
                    x.push(value.parse::<f64>().map_err(|e| Error::Parse {
                        row,
                        column: col.source.clone(),
                        message: format!("`{value}`: {e}"),
                    })?)
                }
                ColumnTransform::Binary => x.push(match value.as_str() {
                    "1" | "true" => 1.0,
                    "0" | "false" => 0.0,
                    _ => {
                        return Err(Error::Parse {
                            row,
                            column: col.source.clone(),
                            message: format!("`{value}` is not binary"),
                        })
                    }
                }),
                ColumnTransform::OneHot { categories } => {
                    x.extend(
                        categories
                            .iter()
                            .map(|c| if c == value { 1.0 } else { 0.0 }),
                    )
                }
            }
        }
        examples.push(LabeledExample::new(x, y, s));
    }
    Ok(Loaded {
        dataset: Dataset::new(examples, encoding)?,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::{ColumnSpec, ValueSet};

    fn schema() -> Schema {
        Schema::new(vec![
            ColumnSpec::new("x", ColumnKind::Continuous),
            ColumnSpec::new("c", ColumnKind::Categorical),
            ColumnSpec::new(
                "g",
                ColumnKind::Sensitive {
                    group0: ValueSet::one_of(["f"]),
                },
            ),
            ColumnSpec::new(
                "y",
                ColumnKind::Label {
                    positive: ValueSet::one_of(["yes"]),
                },
            ),
        ])
    }

    fn load(text: &str) -> Result<Loaded> {
        read_csv(text.as_bytes(), &schema(), None)
    }

    #[test]
    fn missing_rows_dropped() {
        let text = "x,c,g,y\n1,a,f,yes\n2,?,m,no\n3,b,m,yes\n4,a,f,no\n5,b,m,no\n";
        let out = load(text).unwrap();
        assert_eq!(out.dataset.len(), 4);
        assert_eq!(out.report.dropped_missing, 1);
        assert_eq!(out.report.rows_read, 5);
    }

    #[test]
    fn one_hot_first_appearance() {
        let text = "x,c,g,y\n1, b ,f,yes\n2,a,f,no\n3,b,m,yes\n4,b,m,no\n";
        let out = load(text).unwrap();
        let ds = &out.dataset;
        assert_eq!(ds.feature_names(), ["x", "c=b", "c=a"]);
        let oh: Vec<_> = ds
            .examples()
            .iter()
            .map(|e| e.features[1..].to_vec())
            .collect();
        assert_eq!(
            oh,
            vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 0.0]
            ]
        );
        for e in ds.examples() {
            assert_eq!(e.features[1..].iter().sum::<f64>(), 1.0);
        }
        let groups: Vec<_> = ds.examples().iter().map(|e| e.group).collect();
        assert_eq!(
            groups,
            vec![
                SensitiveGroup::S0,
                SensitiveGroup::S0,
                SensitiveGroup::S1,
                SensitiveGroup::S1
            ]
        );
        assert!(ds.examples()[0].label);
    }

    #[test]
    fn parse_error_names_row_and_column() {
        let text = "x,c,g,y\n1,a,f,yes\nabc,a,f,no\n3,a,m,yes\n4,a,m,no\n";
        match load(text) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "x");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_header_column() {
        assert!(matches!(
            load("x,c,y\n1,a,yes\n"),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn everything_filtered() {
        assert!(matches!(
            load("x,c,g,y\n?,a,f,yes\n"),
            Err(Error::EmptyAfterFiltering)
        ));
    }

    #[test]
    fn extra_and_duplicate_columns() {
        let text =
            "id,x,c,g,y,x\n9,1,a,f,yes,100\n9,2,a,f,no,100\n9,3,b,m,yes,100\n9,4,b,m,no,100\n";
        let out = load(text).unwrap();
        let xs: Vec<_> = out
            .dataset
            .examples()
            .iter()
            .map(|e| e.features[0])
            .collect();
        assert_eq!(xs, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn fixed_encoding_maps_unseen_to_zero() {
        let train = load("x,c,g,y\n1,a,f,yes\n2,b,f,no\n3,a,m,yes\n4,b,m,no\n").unwrap();
        let test = read_csv(
            "x,c,g,y\n1,z,f,yes\n2,b,f,no\n3,a,m,yes\n4,b,m,no\n".as_bytes(),
            &schema(),
            Some(train.dataset.encoding()),
        )
        .unwrap();
        assert_eq!(test.dataset.feature_names(), train.dataset.feature_names());
        assert_eq!(test.dataset.examples()[0].features, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn headerless_positional() {
        let s = Schema {
            has_header: false,
            ..schema()
        };
        let out = read_csv(
            "1,a,f,yes\n2,a,f,no\n3,b,m,yes\n4,b,m,no\n".as_bytes(),
            &s,
            None,
        )
        .unwrap();
        assert_eq!(out.dataset.len(), 4);
        assert!(matches!(
            read_csv("1,a,f\n".as_bytes(), &s, None),
            Err(Error::SchemaMismatch(_)) | Err(Error::Csv(_))
        ));
    }
}
