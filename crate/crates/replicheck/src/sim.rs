//! Synthetic GRBD data generation, a within-batch permutation oracle for the
//! F tests, and Monte Carlo calibration studies.
//!
//! All randomness comes from ChaCha8, a seedable, platform-stable generator.
//! Calibration replicate `i` draws from stream `i + 1` of the same seed, so
//! results are identical regardless of execution order.

use crate::anova::grbd_anova;
use crate::domain::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::linmodel::{AnovaTerm, SequentialEngine, SsDecomposition};
use crate::special::Probability;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Parameters of the generative model
/// y_ijk = τ_i + β_j + (τβ)_ij + ε_ijk, ε ~ Normal(0, σ).
///
/// `treatment_effects` is conventionally sum-to-zero; this is not enforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub t: usize,
    pub b: usize,
    /// Replicates per treatment × batch cell.
    pub r: usize,
    /// τ_i, one per treatment level.
    pub treatment_effects: Vec<f64>,
    /// β_j, one per batch level.
    pub batch_effects: Vec<f64>,
    /// Spread of the per-cell interaction draws (τβ)_ij ~ Normal(0, this).
    pub interaction_sd: f64,
    /// Error standard deviation σ.
    pub sigma: f64,
    pub seed: u64,
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if self.t < 2 || self.b < 2 {
            return Err(Error::Config(format!(
                "need t >= 2 and b >= 2, got t = {}, b = {}",
                self.t, self.b
            )));
        }
        if self.r < 1 {
            return Err(Error::Config("need at least 1 replicate per cell".into()));
        }
        if self.treatment_effects.len() != self.t {
            return Err(Error::Config(format!(
                "treatment_effects has {} entries, expected t = {}",
                self.treatment_effects.len(),
                self.t
            )));
        }
        if self.batch_effects.len() != self.b {
            return Err(Error::Config(format!(
                "batch_effects has {} entries, expected b = {}",
                self.batch_effects.len(),
                self.b
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.interaction_sd >= 0.0 && self.interaction_sd.is_finite()) {
            return Err(Error::Config(format!(
                "interaction_sd must be >= 0, got {}",
                self.interaction_sd
            )));
        }
        if self
            .treatment_effects
            .iter()
            .chain(self.batch_effects.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Config("effects must be finite".into()));
        }
        Ok(())
    }
}

fn level_label(prefix: char, index: usize, total: usize) -> String {
    let width = total.to_string().len();
    format!("{prefix}{:0width$}", index + 1)
}

/// Generates one balanced dataset from `params`, fully reproducible per seed.
pub fn generate_grbd(params: &SimParams) -> Result<Dataset> {
    generate_grbd_stream(params, 0)
}

/// Generation on an explicit ChaCha8 sub-stream of the seed; stream 0 is
/// [`generate_grbd`], streams 1.. are the calibration replicates.
pub fn generate_grbd_stream(params: &SimParams, stream: u64) -> Result<Dataset> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(stream);

    // One interaction effect per cell, drawn before the noise pass.
    let mut cell_effects = vec![vec![0.0; params.b]; params.t];
    if params.interaction_sd > 0.0 {
        let dist = Normal::new(0.0, params.interaction_sd)
            .map_err(|e| Error::Config(format!("interaction distribution: {e}")))?;
        for row in cell_effects.iter_mut() {
            for cell in row.iter_mut() {
                *cell = dist.sample(&mut rng);
            }
        }
    }

    let noise = Normal::new(0.0, params.sigma)
        .map_err(|e| Error::Config(format!("noise distribution: {e}")))?;
    let mut observations = Vec::with_capacity(params.t * params.b * params.r);
    for i in 0..params.t {
        let treatment = level_label('T', i, params.t);
        for j in 0..params.b {
            let batch = level_label('B', j, params.b);
            let cell_mean =
                params.treatment_effects[i] + params.batch_effects[j] + cell_effects[i][j];
            for _ in 0..params.r {
                let y = cell_mean + noise.sample(&mut rng);
                observations.push(Observation::new(y, &treatment, &batch)?);
            }
        }
    }
    Dataset::new(format!("sim-{}", params.seed), observations)
}

/// Which F statistic the permutation oracle recomputes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationStatistic {
    /// Treatment MS over error MS.
    Eq1Treatment,
    /// Interaction MS over error MS.
    Interaction,
}

fn f_statistic(d: &SsDecomposition, statistic: PermutationStatistic) -> f64 {
    let error = d.get(AnovaTerm::Error);
    let ms_error = error.ss / error.df as f64;
    let term = match statistic {
        PermutationStatistic::Eq1Treatment => d.get(AnovaTerm::Treatment),
        PermutationStatistic::Interaction => d.get(AnovaTerm::Interaction),
    };
    (term.ss / term.df as f64) / ms_error
}

/// Permutation p-value for the chosen F statistic.
///
/// Treatment labels are permuted independently within each batch (equivalent
/// to permuting outcomes within each batch), preserving batch structure and
/// cell counts; p = (1 + #{perm F ≥ observed F}) / (n_perm + 1).
///
/// If the observed statistic is degenerate (non-finite, e.g. constant
/// outcomes), every permutation is equally degenerate and p = 1 by
/// convention.
pub fn permutation_pvalue(
    dataset: &Dataset,
    statistic: PermutationStatistic,
    n_perm: usize,
    seed: u64,
) -> Result<Probability> {
    if n_perm < 99 {
        return Err(Error::Config(format!(
            "n_perm must be at least 99, got {n_perm}"
        )));
    }
    let engine = SequentialEngine::new(dataset)?;
    let mut y = dataset.included_outcomes();
    let observed = f_statistic(&engine.decompose(&y), statistic);
    if !observed.is_finite() {
        return Probability::new(1.0);
    }

    // Index ranges of each batch among included rows.
    let mut batches: std::collections::BTreeMap<&str, Vec<usize>> = Default::default();
    for (idx, obs) in dataset.included().enumerate() {
        batches.entry(obs.batch()).or_default().push(idx);
    }
    let groups: Vec<Vec<usize>> = batches.into_values().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exceed = 0usize;
    let mut scratch: Vec<f64> = Vec::new();
    for _ in 0..n_perm {
        for group in &groups {
            scratch.clear();
            scratch.extend(group.iter().map(|&i| y[i]));
            scratch.shuffle(&mut rng);
            for (&i, &v) in group.iter().zip(scratch.iter()) {
                y[i] = v;
            }
        }
        let f = f_statistic(&engine.decompose(&y), statistic);
        if !f.is_finite() || f >= observed {
            exceed += 1;
        }
    }
    Probability::new((1.0 + exceed as f64) / (n_perm as f64 + 1.0))
}

/// Outcome of a Monte Carlo calibration study: rejection rates of the three
/// tests at `alpha`, each with its binomial Monte Carlo standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub n_sims: usize,
    pub alpha: f64,
    /// Treatment test against MS(Error).
    pub rejection_rate_eq1: f64,
    /// Treatment test against MS(Treatment×Batch).
    pub rejection_rate_eq2: f64,
    pub rejection_rate_interaction: f64,
    pub monte_carlo_se_eq1: f64,
    pub monte_carlo_se_eq2: f64,
    pub monte_carlo_se_interaction: f64,
}

/// Repeatedly generates data under `params`, runs the GRBD ANOVA, and
/// tallies how often each test rejects at `alpha`.
pub fn calibration_study(params: &SimParams, n_sims: usize, alpha: f64) -> Result<CalibrationResult> {
    if n_sims < 100 {
        return Err(Error::Config(format!(
            "n_sims must be at least 100, got {n_sims}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0, 1), got {alpha}")));
    }
    params.validate()?;

    let mut reject_eq1 = 0usize;
    let mut reject_eq2 = 0usize;
    let mut reject_interaction = 0usize;
    for rep in 0..n_sims {
        let data = generate_grbd_stream(params, rep as u64 + 1)?;
        let table = grbd_anova(&data)?;
        let treatment = table.row(AnovaTerm::Treatment);
        let interaction = table.row(AnovaTerm::Interaction);
        if treatment.p_error.map(|p| p.value() < alpha).unwrap_or(false) {
            reject_eq1 += 1;
        }
        if treatment
            .p_interaction_denom
            .map(|p| p.value() < alpha)
            .unwrap_or(false)
        {
            reject_eq2 += 1;
        }
        if interaction.p_error.map(|p| p.value() < alpha).unwrap_or(false) {
            reject_interaction += 1;
        }
    }

    let rate = |count: usize| count as f64 / n_sims as f64;
    let se = |rate: f64| (rate * (1.0 - rate) / n_sims as f64).sqrt();
    let (r1, r2, ri) = (rate(reject_eq1), rate(reject_eq2), rate(reject_interaction));
    Ok(CalibrationResult {
        n_sims,
        alpha,
        rejection_rate_eq1: r1,
        rejection_rate_eq2: r2,
        rejection_rate_interaction: ri,
        monte_carlo_se_eq1: se(r1),
        monte_carlo_se_eq2: se(r2),
        monte_carlo_se_interaction: se(ri),
    })
}
