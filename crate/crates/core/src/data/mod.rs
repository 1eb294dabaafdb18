//! Schema-driven CSV loading, normalization, splitting and synthetic data.

mod csv;
mod normalize;
mod schema;
mod split;
mod synth;

pub use self::csv::{csv_header, load_csv, load_csv_with_encoding, read_csv, LoadReport, Loaded};
pub use normalize::{apply_normalizer, fit_normalizer, Normalizer, SCALE_FLOOR};
pub use schema::{
    adult_recipe, propublica_recipe, ColumnKind, ColumnSpec, Recipe, RowFilter, Schema,
    SensitiveAttr, ValueSet, SCHEMA_FORMAT_VERSION,
};
pub use split::{split, SplitSpec};
pub use synth::{
    gen_synthetic, implied_biased_rate, synthetic_schema, write_synthetic_csv, FlipRates,
    RealizedRates, SynthOutput, SynthSpec,
};
