//! Data model for two-factor (treatment × batch) experiments: observations,
//! design summaries, GRBD validity checks, and the replication-type taxonomy.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One measured outcome with its treatment and batch labels.
///
/// Labels are trimmed of surrounding whitespace and compared case-sensitively,
/// so CSV padding is tolerated without silently merging distinct levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    outcome: f64,
    treatment: String,
    batch: String,
    excluded: bool,
}

impl Observation {
    pub fn new(outcome: f64, treatment: &str, batch: &str) -> Result<Self> {
        if !outcome.is_finite() {
            return Err(Error::InvalidObservation(format!(
                "outcome {outcome} is not finite"
            )));
        }
        let treatment = treatment.trim();
        let batch = batch.trim();
        if treatment.is_empty() {
            return Err(Error::InvalidObservation("empty treatment label".into()));
        }
        if batch.is_empty() {
            return Err(Error::InvalidObservation("empty batch label".into()));
        }
        Ok(Self {
            outcome,
            treatment: treatment.to_owned(),
            batch: batch.to_owned(),
            excluded: false,
        })
    }

    /// Marks the row excluded (kept in the table so reports can count drops).
    pub fn excluded(mut self, excluded: bool) -> Self {
        self.excluded = excluded;
        self
    }

    pub fn outcome(&self) -> f64 {
        self.outcome
    }

    pub fn treatment(&self) -> &str {
        &self.treatment
    }

    pub fn batch(&self) -> &str {
        &self.batch
    }

    pub fn is_excluded(&self) -> bool {
        self.excluded
    }
}

/// The experiment table: an ordered list of observations.
///
/// Construction requires at least one included observation and at least two
/// distinct treatment and batch levels among included rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    observations: Vec<Observation>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, observations: Vec<Observation>) -> Result<Self> {
        let included: Vec<&Observation> =
            observations.iter().filter(|o| !o.excluded).collect();
        if included.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let t = distinct(included.iter().map(|o| o.treatment.as_str()));
        if t < 2 {
            return Err(Error::InsufficientLevels {
                factor: "treatment",
                found: t,
            });
        }
        let b = distinct(included.iter().map(|o| o.batch.as_str()));
        if b < 2 {
            return Err(Error::InsufficientLevels {
                factor: "batch",
                found: b,
            });
        }
        Ok(Self {
            name: name.into(),
            observations,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Non-excluded rows, in table order.
    pub fn included(&self) -> impl Iterator<Item = &Observation> {
        self.observations.iter().filter(|o| !o.excluded)
    }

    pub fn n_included(&self) -> usize {
        self.included().count()
    }

    pub fn n_excluded(&self) -> usize {
        self.observations.len() - self.n_included()
    }

    /// Outcomes of the included rows, in table order.
    pub fn included_outcomes(&self) -> Vec<f64> {
        self.included().map(|o| o.outcome).collect()
    }
}

fn distinct<'a>(labels: impl Iterator<Item = &'a str>) -> usize {
    let mut seen: Vec<&str> = labels.collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Shape of the design: level counts, per-cell replicate counts, and the
/// flags the GRBD checks are built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    /// Number of treatment levels.
    pub t: usize,
    /// Number of batch levels.
    pub b: usize,
    /// Total included observations.
    pub n: usize,
    /// Treatment labels, sorted.
    pub treatments: Vec<String>,
    /// Batch labels, sorted.
    pub batches: Vec<String>,
    /// cell_counts[i][j] = replicates for treatment i in batch j.
    pub cell_counts: Vec<Vec<usize>>,
    /// All cells have the same replicate count.
    pub balanced: bool,
    /// Every treatment × batch cell has at least one observation.
    pub fully_crossed: bool,
    /// Every cell has at least two observations, making the
    /// treatment-by-batch interaction testable.
    pub genuine_replication: bool,
}

/// Counts included rows per treatment × batch cell and derives design flags.
pub fn summarize_design(dataset: &Dataset) -> DesignSummary {
    let mut treatments: Vec<String> = dataset
        .included()
        .map(|o| o.treatment().to_owned())
        .collect();
    treatments.sort();
    treatments.dedup();
    let mut batches: Vec<String> = dataset.included().map(|o| o.batch().to_owned()).collect();
    batches.sort();
    batches.dedup();

    let (t, b) = (treatments.len(), batches.len());
    let mut cell_counts = vec![vec![0usize; b]; t];
    for obs in dataset.included() {
        let i = treatments.binary_search_by(|l| l.as_str().cmp(obs.treatment())).unwrap();
        let j = batches.binary_search_by(|l| l.as_str().cmp(obs.batch())).unwrap();
        cell_counts[i][j] += 1;
    }

    let n: usize = cell_counts.iter().flatten().sum();
    let min = *cell_counts.iter().flatten().min().unwrap();
    let max = *cell_counts.iter().flatten().max().unwrap();

    DesignSummary {
        t,
        b,
        n,
        treatments,
        batches,
        cell_counts,
        balanced: min == max,
        fully_crossed: min >= 1,
        genuine_replication: min >= 2,
    }
}

/// One GRBD validity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    /// Advisory only; a warning never fails the report.
    pub warning: bool,
    pub message: String,
}

/// Result of the GRBD validity checks; `overall` is the conjunction of the
/// individual passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
    pub overall: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &ValidationCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Checks that a design supports the GRBD analysis: batches crossed with
/// treatments, genuine replication in every cell, and at least two levels of
/// each factor. Imbalance is reported as a warning, not a failure.
pub fn validate_grbd(summary: &DesignSummary) -> ValidationReport {
    let mut checks = Vec::with_capacity(4);

    let levels_ok = summary.t >= 2 && summary.b >= 2;
    checks.push(ValidationCheck {
        name: "minimum-levels".into(),
        passed: levels_ok,
        warning: false,
        message: if levels_ok {
            format!("t = {} treatment levels, b = {} batches", summary.t, summary.b)
        } else {
            format!(
                "need at least 2 levels of each factor (t = {}, b = {})",
                summary.t, summary.b
            )
        },
    });

    let empty = cells_below(summary, 1);
    checks.push(ValidationCheck {
        name: "crossed".into(),
        passed: empty.is_empty(),
        warning: false,
        message: if empty.is_empty() {
            "every treatment is present in every batch".into()
        } else {
            format!(
                "treatment and batch are not crossed; empty cells: {}",
                empty.join(", ")
            )
        },
    });

    let singleton = cells_below(summary, 2);
    checks.push(ValidationCheck {
        name: "genuine-replication".into(),
        passed: singleton.is_empty(),
        warning: false,
        message: if singleton.is_empty() {
            "every cell has at least 2 replicates".into()
        } else {
            format!(
                "cells with fewer than 2 replicates: {}; the treatment-by-batch \
                 interaction is not testable",
                singleton.join(", ")
            )
        },
    });

    let min = summary.cell_counts.iter().flatten().min().copied().unwrap_or(0);
    let max = summary.cell_counts.iter().flatten().max().copied().unwrap_or(0);
    checks.push(ValidationCheck {
        name: "balance".into(),
        passed: true,
        warning: min != max,
        message: if min == max {
            format!("balanced: every cell has {min} replicates")
        } else {
            format!("unbalanced: cell counts range from {min} to {max} (warning only)")
        },
    });

    let overall = checks.iter().all(|c| c.passed);
    ValidationReport { checks, overall }
}

fn cells_below(summary: &DesignSummary, min: usize) -> Vec<String> {
    let mut out = Vec::new();
    for (i, row) in summary.cell_counts.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            if count < min {
                out.push(format!(
                    "({}, {})",
                    summary.treatments[i], summary.batches[j]
                ));
            }
        }
    }
    out
}

/// Whether batches are fully or partially independent of each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Independence {
    Full,
    Partial,
}

/// How batches are spread over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Timing {
    Sequential,
    Staggered,
    Parallel,
}

/// One of the six replication types (independence × timing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationClass {
    pub independence: Independence,
    pub timing: Timing,
    pub label: String,
    pub figure_panel: char,
}

/// Maps the two user-supplied dimensions to the replication type.
///
/// The dimensions are metadata about how the experiment was run; they are
/// never inferred from the data.
pub fn classify_replication(independence: Independence, timing: Timing) -> ReplicationClass {
    let (panel, label) = match (independence, timing) {
        (Independence::Full, Timing::Sequential) => ('A', "independent sequential"),
        (Independence::Partial, Timing::Sequential) => ('B', "partially independent sequential"),
        (Independence::Full, Timing::Parallel) => ('C', "independent parallel"),
        (Independence::Partial, Timing::Parallel) => ('D', "partially independent parallel"),
        (Independence::Full, Timing::Staggered) => ('E', "independent staggered"),
        (Independence::Partial, Timing::Staggered) => ('F', "partially independent staggered"),
    };
    ReplicationClass {
        independence,
        timing,
        label: label.to_owned(),
        figure_panel: panel,
    }
}
