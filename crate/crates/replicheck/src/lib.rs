//! replicheck quantifies internal replication in batched experiments.
//!
//! Many experiments are already split into batches — days, sites, litters,
//! plates — and that structure supports a reproducibility check without new
//! data. This crate fits a generalised randomised block design (GRBD) ANOVA
//! with fixed effects, tests the treatment both against the error mean
//! square and, more stringently, against the treatment-by-batch interaction
//! mean square, tests the interaction itself as the reproducibility
//! criterion, reports per-batch effect sizes with confidence intervals, and
//! classifies the experiment's replication type.
//!
//! Modules:
//! - [`domain`]: observations, datasets, design summaries, GRBD checks, and
//!   the six-way replication-type taxonomy.
//! - [`linmodel`]: dummy-coded design matrices, Householder-QR least
//!   squares, and Type I (sequential) sums of squares.
//! - [`special`]: log-gamma, regularized incomplete beta, the F survival
//!   function, and the Student-t quantile, implemented in-repo.
//! - [`anova`]: the GRBD table with both treatment tests and the verdict.
//! - [`effects`]: per-batch and pooled effect sizes, heterogeneity summary.
//! - [`sim`]: synthetic GRBD data, a within-batch permutation oracle, and
//!   Monte Carlo calibration studies (ChaCha8 RNG, sub-stream per
//!   replicate).
//! - [`cli`]: CSV ingestion, report rendering (text/JSON), and SVG plots.
//!
//! All analysis types are immutable and all operations are pure functions;
//! everything is safe to call from multiple threads.

pub mod anova;
pub mod cli;
pub mod domain;
pub mod effects;
pub mod error;
pub mod linmodel;
pub mod sim;
pub mod special;

pub use anova::{complete_table, grbd_anova, reproducibility_verdict, AnovaRow, AnovaTable, Verdict};
pub use domain::{
    classify_replication, summarize_design, validate_grbd, Dataset, DesignSummary, Independence,
    Observation, ReplicationClass, Timing, ValidationReport,
};
pub use effects::{effect_heterogeneity, per_batch_effects, BatchEffect, EffectSet};
pub use error::{Error, Result};
pub use linmodel::{encode, fit_ols, sequential_ss, AnovaTerm, ModelTerm, ModelTerms, SsDecomposition};
pub use sim::{
    calibration_study, generate_grbd, permutation_pvalue, CalibrationResult, PermutationStatistic,
    SimParams,
};
pub use special::{f_sf, ln_gamma, reg_inc_beta, t_cdf, t_quantile, Probability};
