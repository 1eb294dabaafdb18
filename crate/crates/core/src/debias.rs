//! Debiasing parameters from target rates.
//!
//! The classifier predicts a latent fair label `ȳ`. Training labels `y` are
//! related to it per group through `d[s][ȳ] = P(y=1 | ȳ, s)`. This module
//! turns a user-level target (a shared positive rate, or shared TPR/TNR
//! targets) plus the biased label rates of the training data into those four
//! numbers.
//!
//! Every returned pair satisfies the law of total probability
//!
//! ```text
//! d_y1 * P(ȳ=1|s) + d_y0 * (1 - P(ȳ=1|s)) = P(y=1|s)
//! ```
//!
//! which [`consistency_residual`] measures.

use serde::{Deserialize, Serialize};

use crate::domain::{
    check_half_open_unit, check_open_unit, Dataset, DebiasingParams, GroupRates, PrStrategy,
    PrTarget, ResolvedTarget, SensitiveGroup,
};
use crate::error::{Error, Result};

/// A positive-rate target after any strategy tag has been evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrTargetResolution {
    pub resolved_pr: f64,
    /// `None` when the target was given as an explicit number.
    pub strategy_used: Option<PrStrategy>,
    pub source_rates: GroupRates,
}

/// TNR target chosen from a baseline model's per-group TNRs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TnrSelection {
    pub tnr_by_group: [f64; 2],
    pub selected_tnr: f64,
}

/// Per-group `P(y=1 | s=i)` counted from the dataset labels.
pub fn estimate_biased_rates(dataset: &Dataset) -> Result<GroupRates> {
    let mut pos = [0usize; 2];
    let mut n = [0usize; 2];
    for e in dataset.examples() {
        n[e.group.index()] += 1;
        pos[e.group.index()] += e.label as usize;
    }
    for g in SensitiveGroup::BOTH {
        let i = g.index();
        if n[i] == 0 {
            return Err(Error::EmptyGroup(g));
        }
        if pos[i] == 0 || pos[i] == n[i] {
            return Err(Error::DegenerateLabels(g));
        }
    }
    // one rounding each: integer counts are exact in f64 far beyond any dataset size
    GroupRates::new(
        pos[0] as f64 / n[0] as f64,
        pos[1] as f64 / n[1] as f64,
        n[0],
        n[1],
    )
}

pub fn resolve_pr_target(rates: &GroupRates, target: PrTarget) -> Result<PrTargetResolution> {
    let (p0, p1) = (rates.p0, rates.p1);
    let (resolved_pr, strategy_used) = match target {
        PrTarget::Rate(v) => {
            check_open_unit("pr_target", v)?;
            (v, None)
        }
        PrTarget::Strategy(s) => {
            let v = match s {
                PrStrategy::Avg => 0.5 * (p0 + p1),
                PrStrategy::Min => p0.min(p1),
                PrStrategy::Max => p0.max(p1),
            };
            (v, Some(s))
        }
    };
    Ok(PrTargetResolution {
        resolved_pr,
        strategy_used,
        source_rates: *rates,
    })
}

/// `(d_y0, d_y1)` for one group under a positive-rate target.
///
/// The free parameters (biased TPR and TNR) are pushed as high as the target
/// allows: when the target is at least the biased rate every observed
/// positive stays positive, otherwise every observed negative stays
/// negative.
pub fn debias_for_positive_rate(pr_target: f64, biased_rate: f64) -> Result<(f64, f64)> {
    check_open_unit("pr_target", pr_target)?;
    check_open_unit("biased_rate", biased_rate)?;
    if pr_target >= biased_rate {
        Ok((0.0, biased_rate / pr_target))
    } else {
        Ok(((biased_rate - pr_target) / (1.0 - pr_target), 1.0))
    }
}

/// Positive rate of `ȳ` implied by TPR/TNR targets in a group with biased
/// rate `p`: `(1 - TNR)(1 - p) + TPR * p`.
pub fn induced_positive_rate(tpr_target: f64, tnr_target: f64, biased_rate: f64) -> f64 {
    (1.0 - tnr_target) * (1.0 - biased_rate) + tpr_target * biased_rate
}

/// `(d_y0, d_y1)` for one group under shared TPR/TNR targets.
pub fn debias_for_tpr_tnr(
    tpr_target: f64,
    tnr_target: f64,
    biased_rate: f64,
) -> Result<(f64, f64)> {
    check_half_open_unit("tpr_target", tpr_target)?;
    check_half_open_unit("tnr_target", tnr_target)?;
    check_open_unit("biased_rate", biased_rate)?;
    if tpr_target + tnr_target < 1.0 {
        return Err(Error::DegenerateTarget {
            reason: format!("TPR {tpr_target} + TNR {tnr_target} < 1 inverts the label mapping"),
        });
    }
    let q1 = induced_positive_rate(tpr_target, tnr_target, biased_rate);
    if !(q1 > 0.0 && q1 < 1.0) {
        return Err(Error::DegenerateTarget {
            reason: format!("induced P(ȳ=1|s) = {q1} is not in (0, 1)"),
        });
    }
    let joint_pos = tpr_target * biased_rate; // P(ȳ=1, y=1 | s)
    let d_y1 = joint_pos / q1;
    let d_y0 = biased_rate * (1.0 - tpr_target) / (1.0 - q1);
    Ok((d_y0, d_y1))
}

pub fn select_target_tnr(baseline_tnr_s0: f64, baseline_tnr_s1: f64) -> Result<TnrSelection> {
    check_half_open_unit("baseline_tnr_s0", baseline_tnr_s0)?;
    check_half_open_unit("baseline_tnr_s1", baseline_tnr_s1)?;
    Ok(TnrSelection {
        tnr_by_group: [baseline_tnr_s0, baseline_tnr_s1],
        selected_tnr: baseline_tnr_s0.min(baseline_tnr_s1),
    })
}

/// Debiasing parameters for both groups from a resolved target.
///
/// Both groups share the same target, which is what makes the result a
/// demographic-parity (positive rate) or equalized-odds (TPR/TNR) model.
pub fn build_params(target: &ResolvedTarget, rates: &GroupRates) -> Result<DebiasingParams> {
    let per_group = |g: SensitiveGroup| -> Result<(f64, f64)> {
        let p = rates.rate(g);
        match *target {
            ResolvedTarget::None => Ok((0.0, 1.0)),
            ResolvedTarget::PositiveRate { pr } => debias_for_positive_rate(pr, p),
            ResolvedTarget::TprTnr { tpr, tnr } => debias_for_tpr_tnr(tpr, tnr, p),
        }
    };
    DebiasingParams::from_groups([
        per_group(SensitiveGroup::S0)?,
        per_group(SensitiveGroup::S1)?,
    ])
}

/// Largest per-group violation of `d_y1 q + d_y0 (1 - q) = P(y=1|s)`, where
/// `q` is the target's `P(ȳ=1|s)`.
pub fn consistency_residual(
    params: &DebiasingParams,
    target: &ResolvedTarget,
    rates: &GroupRates,
) -> f64 {
    SensitiveGroup::BOTH
        .iter()
        .map(|&g| {
            let p = rates.rate(g);
            let q = match *target {
                ResolvedTarget::None => p,
                ResolvedTarget::PositiveRate { pr } => pr,
                ResolvedTarget::TprTnr { tpr, tnr } => induced_positive_rate(tpr, tnr, p),
            };
            let (d0, d1) = params.group(g);
            (d1 * q + d0 * (1.0 - q) - p).abs()
        })
        .fold(0.0, f64::max)
}
