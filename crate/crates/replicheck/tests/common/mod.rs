//! Shared test helpers: an independent closed-form oracle for balanced
//! two-way ANOVA (computed from cell means, no regression machinery) and
//! seeded random dataset generators.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use replicheck::{Dataset, Observation};
use std::collections::BTreeMap;

pub struct OracleSs {
    pub batch: f64,
    pub treatment: f64,
    pub interaction: f64,
    pub error: f64,
    pub total: f64,
}

/// Classical closed-form two-way ANOVA sums of squares for balanced data,
/// straight from cell means. Panics if the design is not balanced.
pub fn balanced_oracle(dataset: &Dataset) -> OracleSs {
    let mut cells: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for obs in dataset.included() {
        cells
            .entry((obs.treatment().to_owned(), obs.batch().to_owned()))
            .or_default()
            .push(obs.outcome());
    }
    let mut treatments: Vec<String> = cells.keys().map(|(t, _)| t.clone()).collect();
    treatments.sort();
    treatments.dedup();
    let mut batches: Vec<String> = cells.keys().map(|(_, b)| b.clone()).collect();
    batches.sort();
    batches.dedup();
    let (t, b) = (treatments.len(), batches.len());
    let r = cells.values().next().unwrap().len();
    assert!(cells.len() == t * b && cells.values().all(|v| v.len() == r), "oracle needs balance");

    let mean = |vals: &[f64]| vals.iter().sum::<f64>() / vals.len() as f64;
    let all: Vec<f64> = dataset.included_outcomes();
    let grand = mean(&all);

    let cell_mean = |ti: &str, bj: &str| mean(&cells[&(ti.to_owned(), bj.to_owned())]);
    let treatment_means: Vec<f64> = treatments
        .iter()
        .map(|ti| mean(&batches.iter().map(|bj| cell_mean(ti, bj)).collect::<Vec<_>>()))
        .collect();
    let batch_means: Vec<f64> = batches
        .iter()
        .map(|bj| mean(&treatments.iter().map(|ti| cell_mean(ti, bj)).collect::<Vec<_>>()))
        .collect();

    let ss_treatment = (r * b) as f64
        * treatment_means
            .iter()
            .map(|m| (m - grand) * (m - grand))
            .sum::<f64>();
    let ss_batch = (r * t) as f64
        * batch_means
            .iter()
            .map(|m| (m - grand) * (m - grand))
            .sum::<f64>();
    let mut ss_interaction = 0.0;
    for (i, ti) in treatments.iter().enumerate() {
        for (j, bj) in batches.iter().enumerate() {
            let dev = cell_mean(ti, bj) - treatment_means[i] - batch_means[j] + grand;
            ss_interaction += dev * dev;
        }
    }
    ss_interaction *= r as f64;
    let ss_error: f64 = cells
        .values()
        .map(|vals| {
            let m = mean(vals);
            vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
        })
        .sum();
    let total: f64 = all.iter().map(|v| (v - grand) * (v - grand)).sum();

    OracleSs {
        batch: ss_batch,
        treatment: ss_treatment,
        interaction: ss_interaction,
        error: ss_error,
        total,
    }
}

/// Per-batch treated-minus-control mean differences computed directly from
/// group means (independent of the effects module).
pub fn naive_batch_diffs(dataset: &Dataset, reference: &str) -> Vec<f64> {
    let mut batches: Vec<String> = dataset.included().map(|o| o.batch().to_owned()).collect();
    batches.sort();
    batches.dedup();
    batches
        .iter()
        .map(|bj| {
            let grp = |is_ref: bool| {
                let vals: Vec<f64> = dataset
                    .included()
                    .filter(|o| o.batch() == bj && (o.treatment() == reference) == is_ref)
                    .map(|o| o.outcome())
                    .collect();
                vals.iter().sum::<f64>() / vals.len() as f64
            };
            grp(false) - grp(true)
        })
        .collect()
}

/// Builds a dataset from explicit cell counts; outcomes come from a seeded
/// normal-ish model with treatment, batch, and interaction structure.
pub fn dataset_from_counts(counts: &[Vec<usize>], sigma: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = counts.len();
    let b = counts[0].len();
    let treatment_effects: Vec<f64> = (0..t).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let batch_effects: Vec<f64> = (0..b).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let interaction: Vec<Vec<f64>> = (0..t)
        .map(|_| (0..b).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut rows = Vec::new();
    for (i, per_batch) in counts.iter().enumerate() {
        for (j, &count) in per_batch.iter().enumerate() {
            for _ in 0..count {
                // Sum of uniforms: finite, symmetric noise is all we need.
                let noise: f64 = (0..6).map(|_| rng.gen_range(-0.5..0.5)).sum::<f64>() * sigma;
                let y = 10.0 + treatment_effects[i] + batch_effects[j] + interaction[i][j] + noise;
                rows.push(
                    Observation::new(y, &format!("T{i}"), &format!("B{j}")).unwrap(),
                );
            }
        }
    }
    Dataset::new(format!("gen-{seed}"), rows).unwrap()
}

/// Random unbalanced crossed design with genuine replication everywhere.
pub fn random_unbalanced(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let t = rng.gen_range(2..=4);
    let b = rng.gen_range(2..=4);
    let counts: Vec<Vec<usize>> = (0..t)
        .map(|_| (0..b).map(|_| rng.gen_range(2..=7)).collect())
        .collect();
    dataset_from_counts(&counts, 1.0, seed)
}

/// Random balanced design.
pub fn random_balanced(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x517cc1b727220a95);
    let t = rng.gen_range(2..=4);
    let b = rng.gen_range(2..=4);
    let r = rng.gen_range(2..=6);
    let counts: Vec<Vec<usize>> = (0..t).map(|_| vec![r; b]).collect();
    dataset_from_counts(&counts, 1.0, seed)
}

pub fn assert_rel_close(got: f64, want: f64, rel: f64, what: &str) {
    let scale = want.abs().max(got.abs()).max(1e-300);
    assert!(
        (got - want).abs() <= rel * scale || (got - want).abs() <= 1e-300,
        "{what}: got {got}, want {want} (rel tol {rel})"
    );
}
