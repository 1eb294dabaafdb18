//! Group confusion counts, fairness ratios and repeat aggregation.

use serde::{Deserialize, Serialize};

use crate::domain::SensitiveGroup;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positive_rate(&self) -> Option<f64> {
        ratio(self.tp + self.fp, self.total())
    }

    pub fn tpr(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn tnr(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn div(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    }
}

/// Confusion counts indexed by group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupConfusion {
    pub s0: ConfusionCounts,
    pub s1: ConfusionCounts,
}

impl GroupConfusion {
    pub fn group(&self, g: SensitiveGroup) -> &ConfusionCounts {
        match g {
            SensitiveGroup::S0 => &self.s0,
            SensitiveGroup::S1 => &self.s1,
        }
    }

    fn group_mut(&mut self, g: SensitiveGroup) -> &mut ConfusionCounts {
        match g {
            SensitiveGroup::S0 => &mut self.s0,
            SensitiveGroup::S1 => &mut self.s1,
        }
    }
}

pub fn confusion_by_group(
    predictions: &[bool],
    labels: &[bool],
    groups: &[SensitiveGroup],
) -> Result<GroupConfusion> {
    if predictions.len() != labels.len() || labels.len() != groups.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predictions, {} labels, {} groups",
            predictions.len(),
            labels.len(),
            groups.len()
        )));
    }
    let mut out = GroupConfusion::default();
    for ((&p, &y), &g) in predictions.iter().zip(labels).zip(groups) {
        let c = out.group_mut(g);
        match (p, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(out)
}

/// Accuracy and per-group rates. Ratios are group 0 over group 1; a rate
/// or ratio with a zero denominator is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub accuracy: f64,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub pr_by_group: [f64; 2],
    pub di_ratio: Option<f64>,
    pub tpr_by_group: [Option<f64>; 2],
    pub tnr_by_group: [Option<f64>; 2],
    pub tpr_ratio: Option<f64>,
    pub tnr_ratio: Option<f64>,
    pub n_by_group: [usize; 2],
    pub confusion: GroupConfusion,
}

pub fn fairness_report(confusion: &GroupConfusion) -> Result<FairnessReport> {
    let (c0, c1) = (&confusion.s0, &confusion.s1);
    let pr0 = c0
        .positive_rate()
        .ok_or(Error::EmptyGroup(SensitiveGroup::S0))?;
    let pr1 = c1
        .positive_rate()
        .ok_or(Error::EmptyGroup(SensitiveGroup::S1))?;
    let n = c0.total() + c1.total();
    let correct = c0.tp + c0.tn + c1.tp + c1.tn;
    let tpr = [c0.tpr(), c1.tpr()];
    let tnr = [c0.tnr(), c1.tnr()];
    Ok(FairnessReport {
        accuracy: correct as f64 / n as f64,
        tpr: ratio(c0.tp + c1.tp, c0.tp + c0.fn_ + c1.tp + c1.fn_),
        tnr: ratio(c0.tn + c1.tn, c0.tn + c0.fp + c1.tn + c1.fp),
        pr_by_group: [pr0, pr1],
        di_ratio: div(Some(pr0), Some(pr1)),
        tpr_by_group: tpr,
        tnr_by_group: tnr,
        tpr_ratio: div(tpr[0], tpr[1]),
        tnr_ratio: div(tnr[0], tnr[1]),
        n_by_group: [c0.total(), c1.total()],
        confusion: *confusion,
    })
}

/// Convenience wrapper: counts then report.
pub fn evaluate(
    predictions: &[bool],
    labels: &[bool],
    groups: &[SensitiveGroup],
) -> Result<FairnessReport> {
    fairness_report(&confusion_by_group(predictions, labels, groups)?)
}

/// Mean and sample standard deviation of one metric across repeats.
/// Repeats where the metric was undefined are counted in `excluded`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub count: usize,
    pub excluded: usize,
}

impl MetricSummary {
    pub fn from_values(values: &[Option<f64>]) -> Self {
        let mut xs: Vec<f64> = values.iter().flatten().copied().collect();
        let excluded = values.len() - xs.len();
        if xs.is_empty() {
            return MetricSummary {
                mean: None,
                std: None,
                count: 0,
                excluded,
            };
        }
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() == 1 {
            0.0
        } else {
            let mut sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            sq.sort_by(f64::total_cmp);
            (sq.iter().sum::<f64>() / (n - 1.0)).sqrt()
        };
        MetricSummary {
            mean: Some(mean),
            std: Some(std),
            count: xs.len(),
            excluded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub repeats: usize,
    pub accuracy: MetricSummary,
    pub tpr: MetricSummary,
    pub tnr: MetricSummary,
    pub pr_s0: MetricSummary,
    pub pr_s1: MetricSummary,
    pub di_ratio: MetricSummary,
    pub tpr_s0: MetricSummary,
    pub tpr_s1: MetricSummary,
    pub tpr_ratio: MetricSummary,
    pub tnr_s0: MetricSummary,
    pub tnr_s1: MetricSummary,
    pub tnr_ratio: MetricSummary,
}

pub fn aggregate_runs(reports: &[FairnessReport]) -> Result<AggregateReport> {
    if reports.is_empty() {
        return Err(Error::Empty);
    }
    let pick = |f: &dyn Fn(&FairnessReport) -> Option<f64>| {
        MetricSummary::from_values(&reports.iter().map(f).collect::<Vec<_>>())
    };
    Ok(AggregateReport {
        repeats: reports.len(),
        accuracy: pick(&|r| Some(r.accuracy)),
        tpr: pick(&|r| r.tpr),
        tnr: pick(&|r| r.tnr),
        pr_s0: pick(&|r| Some(r.pr_by_group[0])),
        pr_s1: pick(&|r| Some(r.pr_by_group[1])),
        di_ratio: pick(&|r| r.di_ratio),
        tpr_s0: pick(&|r| r.tpr_by_group[0]),
        tpr_s1: pick(&|r| r.tpr_by_group[1]),
        tpr_ratio: pick(&|r| r.tpr_ratio),
        tnr_s0: pick(&|r| r.tnr_by_group[0]),
        tnr_s1: pick(&|r| r.tnr_by_group[1]),
        tnr_ratio: pick(&|r| r.tnr_ratio),
    })
}
