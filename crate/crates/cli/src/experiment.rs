//! Repeat orchestration shared by every command.

use std::path::{Path, PathBuf};

use fairlabels::data::{
    csv_header, gen_synthetic, load_csv, load_csv_with_encoding, split, synthetic_schema,
    write_synthetic_csv, LoadReport, RealizedRates, Recipe, Schema, SensitiveAttr, SplitSpec,
    SynthSpec,
};
use fairlabels::debias::{
    build_params, consistency_residual, estimate_biased_rates, resolve_pr_target,
    select_target_tnr, PrTargetResolution, TnrSelection,
};
use fairlabels::metrics::{aggregate_runs, evaluate, AggregateReport, FairnessReport};
use fairlabels::model::{train, Model, TrainConfig};
use fairlabels::{
    Dataset, DebiasingParams, Error, GroupRates, PrTarget, ResolvedTarget, Result, TargetSpec,
    TnrTarget,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::{DataArgs, EvalArgs, Fairness, RunArgs, SweepArgs, SynthArgs, TargetArgs};
use crate::output::{io_err, write_atomic, write_json};

/// Where the data came from, echoed into outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSource {
    pub path: PathBuf,
    pub recipe: Option<Recipe>,
    pub sensitive: Option<SensitiveAttr>,
    pub schema_path: Option<PathBuf>,
}

/// How baseline TNRs for `auto` targets are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TnrProtocol {
    /// Held-out slice of the training part.
    Validation,
    /// The test split itself.
    Test,
}

/// Everything one experiment needs apart from the data itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DataSource,
    pub target: TargetSpec,
    /// Training settings; `seed` is the base seed.
    pub train: TrainConfig,
    pub test_fraction: f64,
    pub val_fraction: f64,
    pub tnr_protocol: TnrProtocol,
    pub repeats: usize,
    pub base_seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        SplitSpec::new(self.test_fraction, 0)?;
        SplitSpec::new(self.val_fraction, 0)?;
        self.target.validate()?;
        self.train.validate()
    }

    pub fn seed_for(&self, repeat: usize) -> u64 {
        self.base_seed.wrapping_add(repeat as u64)
    }
}

/// Outcome of one seeded repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_val: Option<usize>,
    pub n_test: usize,
    pub train_rates: GroupRates,
    pub pr_resolution: Option<PrTargetResolution>,
    pub tnr_selection: Option<TnrSelection>,
    pub resolved_target: ResolvedTarget,
    pub debias: DebiasingParams,
    pub consistency_residual: f64,
    pub final_train_loss: f64,
    pub report: FairnessReport,
}

fn test_report(model: &Model, data: &Dataset) -> Result<FairnessReport> {
    let preds: Vec<bool> = model
        .predict_dataset(data)?
        .into_iter()
        .map(|p| p.0)
        .collect();
    let labels: Vec<bool> = data.examples().iter().map(|e| e.label).collect();
    let groups: Vec<_> = data.examples().iter().map(|e| e.group).collect();
    evaluate(&preds, &labels, &groups)
}

/// Split, resolve the target, train and evaluate for repeat `repeat`.
pub fn run_repeat(data: &Dataset, cfg: &RunConfig, repeat: usize) -> Result<(RepeatResult, Model)> {
    let seed = cfg.seed_for(repeat);
    let (rest, test) = split(data, &SplitSpec::new(cfg.test_fraction, seed)?)?;
    let selecting = cfg.target.needs_tnr_selection();
    let (train_set, val) = if selecting && cfg.tnr_protocol == TnrProtocol::Validation {
        let (t, v) = split(&rest, &SplitSpec::new(cfg.val_fraction, seed)?)?;
        (t, Some(v))
    } else {
        (rest, None)
    };
    let rates = estimate_biased_rates(&train_set)?;
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };

    let mut pr_resolution = None;
    let mut tnr_selection = None;
    let resolved = match cfg.target {
        TargetSpec::None => ResolvedTarget::None,
        TargetSpec::PositiveRate { pr } => {
            let r = resolve_pr_target(&rates, pr)?;
            pr_resolution = Some(r);
            ResolvedTarget::PositiveRate { pr: r.resolved_pr }
        }
        TargetSpec::TprTnr { tpr, tnr } => {
            let tnr = match tnr {
                TnrTarget::Rate(v) => v,
                TnrTarget::Auto => {
                    let baseline = train(&train_set, &DebiasingParams::identity(), &train_cfg)?;
                    let report = test_report(&baseline, val.as_ref().unwrap_or(&test))?;
                    let [t0, t1] = report.tnr_by_group;
                    let (Some(t0), Some(t1)) = (t0, t1) else {
                        return Err(Error::DegenerateTarget {
                            reason: "baseline TNR undefined on the selection split".into(),
                        });
                    };
                    let sel = select_target_tnr(t0, t1)?;
                    tnr_selection = Some(sel);
                    sel.selected_tnr
                }
            };
            ResolvedTarget::TprTnr { tpr, tnr }
        }
    };
    let debias = build_params(&resolved, &rates)?;
    let model = train(&train_set, &debias, &train_cfg)?;
    let report = test_report(&model, &test)?;
    let result = RepeatResult {
        repeat,
        seed,
        n_train: train_set.len(),
        n_val: val.as_ref().map(Dataset::len),
        n_test: test.len(),
        train_rates: rates,
        pr_resolution,
        tnr_selection,
        resolved_target: resolved,
        consistency_residual: consistency_residual(&debias, &resolved, &rates),
        debias,
        final_train_loss: model.final_train_loss,
        report,
    };
    Ok((result, model))
}

/// All repeats, run in parallel and returned in repeat order.
pub fn run_repeats(data: &Dataset, cfg: &RunConfig) -> Result<Vec<(RepeatResult, Model)>> {
    cfg.validate()?;
    (0..cfg.repeats)
        .into_par_iter()
        .map(|i| run_repeat(data, cfg, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub config: RunConfig,
    pub load: LoadReport,
    pub repeats: Vec<RepeatResult>,
    pub aggregate: AggregateReport,
}

impl RunOutput {
    fn new(config: RunConfig, load: LoadReport, results: Vec<RepeatResult>) -> Result<Self> {
        let reports: Vec<FairnessReport> = results.iter().map(|r| r.report.clone()).collect();
        Ok(RunOutput {
            aggregate: aggregate_runs(&reports)?,
            config,
            load,
            repeats: results,
        })
    }
}

pub fn schema_for(args: &DataArgs) -> Result<(Schema, DataSource)> {
    let source = DataSource {
        path: args.data.clone(),
        recipe: args.recipe.map(Recipe::from),
        sensitive: args.recipe.map(|_| SensitiveAttr::from(args.sensitive)),
        schema_path: args.schema.clone(),
    };
    let schema = match (&args.schema, args.recipe) {
        (Some(path), _) => Schema::load(path)?,
        (None, Some(r)) => Recipe::from(r).schema(args.sensitive.into()),
        (None, None) => {
            return Err(Error::InvalidConfig(
                "either --schema or --recipe is required".into(),
            ))
        }
    };
    Ok((schema, source))
}

pub fn target_spec(args: &TargetArgs) -> Result<TargetSpec> {
    let spec = match args.fairness {
        Fairness::None => TargetSpec::None,
        Fairness::Dp => TargetSpec::PositiveRate { pr: args.target_pr },
        Fairness::Eqopp => TargetSpec::TprTnr {
            tpr: args.target_tpr.ok_or_else(|| {
                Error::InvalidConfig("--fairness eqopp needs --target-tpr".into())
            })?,
            tnr: args.target_tnr,
        },
    };
    spec.validate()?;
    Ok(spec)
}

/// Parses flags into a config and loads the data.
pub fn prepare(args: &RunArgs, target: TargetSpec) -> Result<(RunConfig, Dataset, LoadReport)> {
    let (schema, source) = schema_for(&args.data)?;
    let l2 = args
        .train
        .l2
        .unwrap_or_else(|| source.recipe.map_or(0.0, Recipe::default_l2));
    let p = &args.protocol;
    let cfg = RunConfig {
        data: source,
        target,
        train: TrainConfig {
            epochs: args.train.epochs,
            batch_size: args.train.batch_size,
            learning_rate: args.train.lr,
            l2,
            seed: p.seed,
            use_s: args.train.use_s,
            ..TrainConfig::default()
        },
        test_fraction: p.test_fraction,
        val_fraction: p.val_fraction,
        tnr_protocol: if p.paper_protocol {
            TnrProtocol::Test
        } else {
            TnrProtocol::Validation
        },
        repeats: p.repeats,
        base_seed: p.seed,
    };
    cfg.validate()?;
    let loaded = load_csv(&args.data.data, &schema)?;
    Ok((cfg, loaded.dataset, loaded.report))
}

fn save_models(dir: &Path, runs: &[(RepeatResult, Model)]) -> Result<()> {
    for (r, m) in runs {
        let mut text = m.to_json()?;
        text.push('\n');
        write_atomic(
            &dir.join(format!("models/repeat_{}.json", r.repeat)),
            text.as_bytes(),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RatesFile<'a> {
    data: &'a DataSource,
    dataset_rates: GroupRates,
    repeats: Vec<RepeatRates>,
}

#[derive(Serialize)]
struct RepeatRates {
    repeat: usize,
    seed: u64,
    train_rates: GroupRates,
    test_tpr_by_group: [Option<f64>; 2],
    test_tnr_by_group: [Option<f64>; 2],
}

pub fn cmd_baseline(args: &RunArgs) -> Result<RunOutput> {
    let (cfg, data, load) = prepare(args, TargetSpec::None)?;
    let runs = run_repeats(&data, &cfg)?;
    let out = &args.protocol.out;
    save_models(out, &runs)?;
    let rates = RatesFile {
        data: &cfg.data,
        dataset_rates: estimate_biased_rates(&data)?,
        repeats: runs
            .iter()
            .map(|(r, _)| RepeatRates {
                repeat: r.repeat,
                seed: r.seed,
                train_rates: r.train_rates,
                test_tpr_by_group: r.report.tpr_by_group,
                test_tnr_by_group: r.report.tnr_by_group,
            })
            .collect(),
    };
    write_json(&out.join("rates.json"), "rates", &rates)?;
    let output = RunOutput::new(cfg, load, runs.into_iter().map(|r| r.0).collect())?;
    write_json(&out.join("baseline.json"), "baseline", &output)?;
    Ok(output)
}

pub fn cmd_train(args: &RunArgs) -> Result<RunOutput> {
    let (cfg, data, load) = prepare(args, target_spec(&args.target)?)?;
    let runs = run_repeats(&data, &cfg)?;
    let out = &args.protocol.out;
    save_models(out, &runs)?;
    let output = RunOutput::new(cfg, load, runs.into_iter().map(|r| r.0).collect())?;
    write_json(&out.join("report.json"), "train", &output)?;
    Ok(output)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub target: TargetSpec,
    pub repeats: Vec<RepeatResult>,
    pub aggregate: AggregateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub config: RunConfig,
    /// `pr` or `tpr`.
    pub swept: String,
    pub grid: Vec<f64>,
    pub load: LoadReport,
    /// Completed grid points, in grid order.
    pub points: Vec<SweepPoint>,
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<SweepOutput> {
    let tnr = args.run.target.target_tnr;
    let (swept, make): (&str, Box<dyn Fn(f64) -> TargetSpec>) = match args.run.target.fairness {
        Fairness::None => {
            return Err(Error::InvalidConfig(
                "sweep needs --fairness dp or eqopp".into(),
            ));
        }
        Fairness::Dp => (
            "pr",
            Box::new(|v| TargetSpec::PositiveRate {
                pr: PrTarget::Rate(v),
            }),
        ),
        Fairness::Eqopp => ("tpr", Box::new(move |v| TargetSpec::TprTnr { tpr: v, tnr })),
    };
    if args.grid.is_empty() {
        return Err(Error::InvalidConfig("empty grid".into()));
    }
    for &v in &args.grid {
        make(v).validate()?;
    }
    let (cfg, data, load) = prepare(&args.run, make(args.grid[0]))?;
    let path = args.run.protocol.out.join("sweep.json");
    let mut output = SweepOutput {
        config: cfg.clone(),
        swept: swept.to_string(),
        grid: args.grid.clone(),
        load,
        points: Vec::with_capacity(args.grid.len()),
    };
    for &value in &args.grid {
        let point_cfg = RunConfig {
            target: make(value),
            ..cfg.clone()
        };
        let results: Vec<RepeatResult> = run_repeats(&data, &point_cfg)?
            .into_iter()
            .map(|r| r.0)
            .collect();
        let reports: Vec<FairnessReport> = results.iter().map(|r| r.report.clone()).collect();
        output.points.push(SweepPoint {
            value,
            target: point_cfg.target,
            aggregate: aggregate_runs(&reports)?,
            repeats: results,
        });
        write_json(&path, "sweep", &output)?;
    }
    Ok(output)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub model: PathBuf,
    pub data: DataSource,
    pub load: LoadReport,
    pub debias: DebiasingParams,
    pub report: FairnessReport,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalOutput> {
    let model = Model::load(&args.model)?;
    let (schema, source) = schema_for(&args.data)?;
    if model.use_s && schema.has_header {
        let name = schema
            .sensitive_column()
            .map(|c| c.name.as_str())
            .unwrap_or_default();
        if !csv_header(&args.data.data)?.iter().any(|h| h == name) {
            return Err(Error::FeatureMismatch(format!(
                "model uses the sensitive attribute but {} has no `{name}` column",
                args.data.data.display()
            )));
        }
    }
    let loaded = load_csv_with_encoding(&args.data.data, &schema, &model.encoding)?;
    let report = test_report(&model, &loaded.dataset)?;
    let output = EvalOutput {
        model: args.model.clone(),
        data: source,
        load: loaded.report,
        debias: model.debias,
        report,
    };
    write_json(&args.out.join("report.json"), "eval", &output)?;
    Ok(output)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub spec: SynthSpec,
    pub realized: RealizedRates,
    pub true_labels: Vec<u8>,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<SynthTruth> {
    let spec = SynthSpec::load(&args.spec)?;
    let out = gen_synthetic(&spec)?;
    let mut csv = Vec::new();
    write_synthetic_csv(&out.dataset, &mut csv)?;
    write_atomic(&args.out.join("data.csv"), &csv)?;
    let mut schema = synthetic_schema(spec.dim).to_json()?;
    schema.push('\n');
    write_atomic(&args.out.join("schema.json"), schema.as_bytes())?;
    let truth = SynthTruth {
        spec,
        realized: out.realized,
        true_labels: out.true_labels.iter().map(|&t| u8::from(t)).collect(),
    };
    write_json(&args.out.join("truth.json"), "synth_truth", &truth)?;
    Ok(truth)
}

/// Reads a JSON output file back, checking its version tag.
pub fn read_output<T: for<'de> Deserialize<'de>>(path: &Path, kind: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .unwrap_or(0);
    if version != u64::from(crate::output::OUTPUT_FORMAT_VERSION) {
        return Err(Error::FormatVersion {
            found: version as u32,
            expected: crate::output::OUTPUT_FORMAT_VERSION,
        });
    }
    if value.get("kind").and_then(|k| k.as_str()) != Some(kind) {
        return Err(Error::InvalidConfig(format!(
            "{} is not a `{kind}` file",
            path.display()
        )));
    }
    Ok(serde_json::from_value(value)?)
}
