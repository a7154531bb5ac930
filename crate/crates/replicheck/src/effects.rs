//! Per-batch and pooled treatment effect sizes with confidence intervals,
//! plus a heterogeneity summary of how the effect varies across batches.
//!
//! Each batch is analysed separately with a two-group pooled-variance
//! interval; the pooled entry ignores batches entirely. Batch-local
//! variances are used rather than the global error mean square.

use crate::anova::AnovaTable;
use crate::domain::{summarize_design, Dataset};
use crate::error::{Error, Result};
use crate::linmodel::AnovaTerm;
use crate::special::{t_quantile, Probability};
use serde::{Deserialize, Serialize};

/// Treated-minus-reference mean difference within one batch (or pooled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEffect {
    pub batch: String,
    /// mean(non-reference) − mean(reference), in outcome units.
    pub diff: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_treated: usize,
    pub n_control: usize,
}

/// Per-batch effects plus the pooled two-group analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSet {
    pub per_batch: Vec<BatchEffect>,
    /// Two-group analysis over all batches, labelled "pooled".
    pub overall: BatchEffect,
    pub confidence: f64,
    /// The treatment level subtracted in every difference.
    pub reference: String,
}

/// Computes per-batch and pooled effect sizes for a two-level treatment.
///
/// `reference` defaults to the lexicographically smallest treatment label.
/// Requires at least two observations per treatment in every batch.
pub fn per_batch_effects(
    dataset: &Dataset,
    confidence: f64,
    reference: Option<&str>,
) -> Result<EffectSet> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Config(format!(
            "confidence must be in (0, 1), got {confidence}"
        )));
    }
    let summary = summarize_design(dataset);
    if summary.t != 2 {
        return Err(Error::Config(format!(
            "effect sizes support exactly 2 treatment levels, found {}",
            summary.t
        )));
    }
    let reference = match reference {
        Some(r) => {
            let r = r.trim();
            if !summary.treatments.iter().any(|t| t == r) {
                return Err(Error::Config(format!(
                    "reference level '{r}' is not a treatment label (levels: {})",
                    summary.treatments.join(", ")
                )));
            }
            r.to_owned()
        }
        None => summary.treatments[0].clone(),
    };
    if !summary.genuine_replication {
        return Err(Error::GenuineReplication(
            "per-batch effects need at least 2 observations per treatment in every batch".into(),
        ));
    }

    let mut per_batch = Vec::with_capacity(summary.b);
    for batch in &summary.batches {
        let control: Vec<f64> = dataset
            .included()
            .filter(|o| o.batch() == batch && o.treatment() == reference)
            .map(|o| o.outcome())
            .collect();
        let treated: Vec<f64> = dataset
            .included()
            .filter(|o| o.batch() == batch && o.treatment() != reference)
            .map(|o| o.outcome())
            .collect();
        per_batch.push(two_group_effect(batch, &control, &treated, confidence)?);
    }

    let control: Vec<f64> = dataset
        .included()
        .filter(|o| o.treatment() == reference)
        .map(|o| o.outcome())
        .collect();
    let treated: Vec<f64> = dataset
        .included()
        .filter(|o| o.treatment() != reference)
        .map(|o| o.outcome())
        .collect();
    let overall = two_group_effect("pooled", &control, &treated, confidence)?;

    Ok(EffectSet {
        per_batch,
        overall,
        confidence,
        reference,
    })
}

fn two_group_effect(
    label: &str,
    control: &[f64],
    treated: &[f64],
    confidence: f64,
) -> Result<BatchEffect> {
    let (n_c, n_t) = (control.len(), treated.len());
    debug_assert!(n_c >= 2 && n_t >= 2);
    let mean_c = control.iter().sum::<f64>() / n_c as f64;
    let mean_t = treated.iter().sum::<f64>() / n_t as f64;
    let ss_c: f64 = control.iter().map(|v| (v - mean_c) * (v - mean_c)).sum();
    let ss_t: f64 = treated.iter().map(|v| (v - mean_t) * (v - mean_t)).sum();
    let df = n_c + n_t - 2;
    let pooled_var = (ss_c + ss_t) / df as f64;
    if pooled_var <= 0.0 {
        return Err(Error::DegenerateData(format!(
            "zero within-group variance in '{label}'; the effect interval is undefined"
        )));
    }
    let se = (pooled_var * (1.0 / n_t as f64 + 1.0 / n_c as f64)).sqrt();
    let diff = mean_t - mean_c;
    let margin = t_quantile((1.0 + confidence) / 2.0, df)? * se;
    Ok(BatchEffect {
        batch: label.to_owned(),
        diff,
        se,
        ci_low: diff - margin,
        ci_high: diff + margin,
        n_treated: n_t,
        n_control: n_c,
    })
}

/// How much the per-batch effects disagree: spread, sign pattern, and the
/// formal interaction test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneitySummary {
    /// max − min of the per-batch differences.
    pub range: f64,
    /// Sample standard deviation of the per-batch differences.
    pub sd: f64,
    /// Some batch differences are positive and some negative.
    pub mixed_signs: bool,
    /// The treatment-by-batch interaction p-value.
    pub interaction_p: Option<Probability>,
    pub note: String,
}

/// Summarizes the spread of per-batch effects; `table` supplies the formal
/// interaction test. Both inputs must come from the same dataset.
pub fn effect_heterogeneity(effects: &EffectSet, table: &AnovaTable) -> HeterogeneitySummary {
    debug_assert_eq!(effects.per_batch.len(), table.b);
    let diffs: Vec<f64> = effects.per_batch.iter().map(|e| e.diff).collect();
    let min = diffs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = diffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let sd = if diffs.len() > 1 {
        (diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (diffs.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    let mixed_signs = diffs.iter().any(|&d| d > 0.0) && diffs.iter().any(|&d| d < 0.0);
    let note = if mixed_signs {
        format!(
            "per-batch effects disagree in direction (from {min:.4} to {max:.4}): some batches \
             show the effect reversed"
        )
    } else if max == min {
        "all per-batch effects are identical".to_string()
    } else {
        format!("per-batch effects share a direction, ranging from {min:.4} to {max:.4}")
    };
    HeterogeneitySummary {
        range: max - min,
        sd,
        mixed_signs,
        interaction_p: table.row(AnovaTerm::Interaction).p_error,
        note,
    }
}
