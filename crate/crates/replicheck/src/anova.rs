//! GRBD ANOVA table assembly, the two treatment tests, the
//! treatment-by-batch interaction test, and the reproducibility verdict.
//!
//! Every effect term gets the standard F test against MS(Error); the
//! treatment term additionally gets the stringent test against the
//! interaction mean square, on (t−1, (t−1)(b−1)) degrees of freedom.

use crate::domain::{summarize_design, validate_grbd, Dataset};
use crate::error::{Error, Result};
use crate::linmodel::{sequential_ss, AnovaTerm, TermSummary};
use crate::special::{f_sf, Probability};
use serde::{Deserialize, Serialize};

/// One row of the ANOVA table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub term: AnovaTerm,
    pub df: usize,
    pub ss: f64,
    pub ms: f64,
    /// F against MS(Error); present for batch, treatment, and interaction.
    pub f_error: Option<f64>,
    pub p_error: Option<Probability>,
    /// F against MS(Treatment×Batch); present for treatment only.
    pub f_interaction_denom: Option<f64>,
    pub p_interaction_denom: Option<Probability>,
}

/// The four-row ANOVA table (batch, treatment, interaction, error).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub rows: Vec<AnovaRow>,
    pub n: usize,
    pub t: usize,
    pub b: usize,
    /// Reasons for any test reported as unavailable.
    pub notes: Vec<String>,
}

impl AnovaTable {
    pub fn row(&self, term: AnovaTerm) -> &AnovaRow {
        self.rows.iter().find(|r| r.term == term).unwrap()
    }
}

/// Fits the GRBD ANOVA for a dataset: sequential sums of squares, both
/// treatment tests, and the interaction test.
pub fn grbd_anova(dataset: &Dataset) -> Result<AnovaTable> {
    let summary = summarize_design(dataset);
    let validation = validate_grbd(&summary);
    if !validation.overall {
        if !summary.fully_crossed {
            return Err(Error::NotCrossed(check_message(&validation, "crossed")));
        }
        if !summary.genuine_replication {
            return Err(Error::GenuineReplication(check_message(
                &validation,
                "genuine-replication",
            )));
        }
        return Err(Error::Config(
            validation
                .failures()
                .map(|c| c.message.clone())
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }
    let decomposition = sequential_ss(dataset)?;
    assemble(&decomposition.terms, summary.n, summary.t, summary.b)
}

fn check_message(validation: &crate::domain::ValidationReport, name: &str) -> String {
    validation
        .checks
        .iter()
        .find(|c| c.name == name)
        .map(|c| c.message.clone())
        .unwrap_or_default()
}

/// Completes an ANOVA table from published term summaries (df and SS),
/// without raw data: fills MS, both F columns, and both p columns exactly as
/// [`grbd_anova`] would.
pub fn complete_table(terms: &[(AnovaTerm, usize, f64)], n: usize) -> Result<AnovaTable> {
    let mut by_term: Vec<Option<TermSummary>> = vec![None, None, None, None];
    for &(term, df, ss) in terms {
        let slot = match term {
            AnovaTerm::Batch => 0,
            AnovaTerm::Treatment => 1,
            AnovaTerm::Interaction => 2,
            AnovaTerm::Error => 3,
        };
        if by_term[slot].is_some() {
            return Err(Error::Inconsistent(format!(
                "term {:?} appears more than once",
                term
            )));
        }
        if df == 0 {
            return Err(Error::Inconsistent(format!(
                "term {:?} must have positive degrees of freedom",
                term
            )));
        }
        if !ss.is_finite() || ss < 0.0 {
            return Err(Error::Inconsistent(format!(
                "term {:?} has invalid sum of squares {ss}",
                term
            )));
        }
        by_term[slot] = Some(TermSummary { term, df, ss });
    }
    let ordered: Vec<TermSummary> = match by_term.into_iter().collect::<Option<Vec<_>>>() {
        Some(v) => v,
        None => {
            return Err(Error::Inconsistent(
                "all four terms (batch, treatment, interaction, error) are required".into(),
            ))
        }
    };

    let df_sum: usize = ordered.iter().map(|t| t.df).sum();
    if df_sum != n - 1 {
        return Err(Error::Inconsistent(format!(
            "degrees of freedom sum to {df_sum}, expected N - 1 = {}",
            n - 1
        )));
    }
    let t = ordered[1].df + 1;
    let b = ordered[0].df + 1;
    if ordered[2].df != (t - 1) * (b - 1) {
        return Err(Error::Inconsistent(format!(
            "interaction df {} does not match (t-1)(b-1) = {}",
            ordered[2].df,
            (t - 1) * (b - 1)
        )));
    }
    if ordered[3].df != n - t * b {
        return Err(Error::Inconsistent(format!(
            "error df {} does not match N - t*b = {}",
            ordered[3].df,
            n - t * b
        )));
    }
    assemble(&ordered, n, t, b)
}

/// Shared assembly: MS, F, and p columns from term summaries.
fn assemble(terms: &[TermSummary], n: usize, t: usize, b: usize) -> Result<AnovaTable> {
    let error = terms
        .iter()
        .find(|s| s.term == AnovaTerm::Error)
        .expect("error term present");
    let ms_error = error.ss / error.df as f64;
    if ms_error <= 0.0 {
        return Err(Error::DegenerateData(
            "mean squared error is zero (all within-cell values identical); F tests are undefined"
                .into(),
        ));
    }
    let interaction = terms
        .iter()
        .find(|s| s.term == AnovaTerm::Interaction)
        .expect("interaction term present");
    let ms_interaction = interaction.ss / interaction.df as f64;

    let mut notes = Vec::new();
    let mut rows = Vec::with_capacity(4);
    for summary in terms {
        let ms = summary.ss / summary.df as f64;
        let (mut f_error, mut p_error) = (None, None);
        if summary.term != AnovaTerm::Error {
            let f = ms / ms_error;
            f_error = Some(f);
            p_error = Some(f_sf(f, summary.df, error.df)?);
        }
        let (mut f_int, mut p_int) = (None, None);
        if summary.term == AnovaTerm::Treatment {
            if ms_interaction > 0.0 {
                let f = ms / ms_interaction;
                f_int = Some(f);
                p_int = Some(f_sf(f, summary.df, interaction.df)?);
            } else {
                notes.push(
                    "stringent treatment test unavailable: the interaction mean square is zero"
                        .into(),
                );
            }
        }
        rows.push(AnovaRow {
            term: summary.term,
            df: summary.df,
            ss: summary.ss,
            ms,
            f_error,
            p_error,
            f_interaction_denom: f_int,
            p_interaction_denom: p_int,
        });
    }

    Ok(AnovaTable { rows, n, t, b, notes })
}

/// The reproducibility reading of an ANOVA table at a significance level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub alpha: f64,
    /// Treatment test against MS(Error).
    pub treatment_significant_eq1: bool,
    /// Interaction test: significant means the effect varies across batches
    /// beyond sampling noise, i.e. the experiment does not replicate
    /// internally.
    pub interaction_significant: bool,
    /// Stringent treatment test against MS(Treatment×Batch).
    pub treatment_significant_eq2: bool,
    pub narrative: String,
}

/// Compares the table's p-values to `alpha` and writes the narrative,
/// including the low-power caveat for the stringent test.
pub fn reproducibility_verdict(table: &AnovaTable, alpha: f64) -> Verdict {
    let treatment = table.row(AnovaTerm::Treatment);
    let interaction = table.row(AnovaTerm::Interaction);

    let sig = |p: Option<Probability>| p.map(|p| p.value() < alpha).unwrap_or(false);
    let treatment_significant_eq1 = sig(treatment.p_error);
    let interaction_significant = sig(interaction.p_error);
    let treatment_significant_eq2 = sig(treatment.p_interaction_denom);

    let p_str = |p: Option<Probability>| {
        p.map(|p| format_p(p.value()))
            .unwrap_or_else(|| "unavailable".into())
    };

    let mut narrative = format!(
        "At alpha = {alpha}: the standard test {} a treatment effect (F = {}, p = {}). ",
        if treatment_significant_eq1 {
            "detects"
        } else {
            "does not detect"
        },
        treatment
            .f_error
            .map(format_f)
            .unwrap_or_else(|| "unavailable".into()),
        p_str(treatment.p_error),
    );
    if interaction_significant {
        narrative.push_str(&format!(
            "The treatment-by-batch interaction is significant (p = {}), so the effect size \
             varies across batches more than sampling variability explains: the experiment \
             does not replicate internally, and the average effect should be interpreted \
             with caution. ",
            p_str(interaction.p_error),
        ));
    } else {
        narrative.push_str(&format!(
            "The treatment-by-batch interaction is not significant (p = {}): the per-batch \
             effects are consistent with a stable effect plus sampling variability. ",
            p_str(interaction.p_error),
        ));
    }
    match treatment.p_interaction_denom {
        Some(p) => narrative.push_str(&format!(
            "The stringent test of the treatment against its batch-to-batch variation is {} \
             (F = {}, p = {}). This test has only {} denominator degrees of freedom — it scales \
             with the number of batches, not observations — so a significant result is strong \
             evidence for the effect, while a non-significant one carries little weight against it.",
            if treatment_significant_eq2 {
                "significant"
            } else {
                "not significant"
            },
            treatment
                .f_interaction_denom
                .map(format_f)
                .unwrap_or_else(|| "unavailable".into()),
            format_p(p.value()),
            interaction.df,
        )),
        None => narrative.push_str(
            "The stringent test of the treatment against its batch-to-batch variation is \
             unavailable for this table.",
        ),
    }

    Verdict {
        alpha,
        treatment_significant_eq1,
        interaction_significant,
        treatment_significant_eq2,
        narrative,
    }
}

/// Display rule for F statistics: one decimal place.
pub fn format_f(f: f64) -> String {
    format!("{f:.1}")
}

/// Display rule for p-values: three decimals, floored at "<0.001".
pub fn format_p(p: f64) -> String {
    if p < 0.0005 {
        "<0.001".to_string()
    } else {
        format!("{p:.3}")
    }
}

/// Display rule for SS/MS amounts: integers (ties to even) when large,
/// otherwise four decimals.
pub fn format_amount(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 100.0 {
        format!("{}", v.round_ties_even() as i64)
    } else {
        format!("{v:.4}")
    }
}
