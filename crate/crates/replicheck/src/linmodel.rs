//! Least-squares machinery: dummy-coded design matrices for the nested model
//! sequence {intercept} ⊂ {+batch} ⊂ {+treatment} ⊂ {+interaction}, stable
//! orthogonal-factorization fits, and Type I (sequential) sums of squares
//! that handle unbalanced data.

use crate::domain::{summarize_design, Dataset};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A column is dropped when its residual norm after orthogonalization falls
/// below this fraction of its original norm.
pub const RANK_TOL: f64 = 1e-10;

/// Model terms, in fitting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelTerm {
    Intercept,
    Batch,
    Treatment,
    Interaction,
}

/// An ordered, validated term list: the intercept is always present and
/// first, and the interaction requires both main effects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelTerms(Vec<ModelTerm>);

impl ModelTerms {
    pub fn new(terms: &[ModelTerm]) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Config("empty model term list".into()));
        }
        if terms[0] != ModelTerm::Intercept {
            return Err(Error::Config("the intercept must be the first term".into()));
        }
        for (i, term) in terms.iter().enumerate() {
            if terms[..i].contains(term) {
                return Err(Error::Config(format!("duplicate model term {term:?}")));
            }
        }
        if terms.contains(&ModelTerm::Interaction)
            && !(terms.contains(&ModelTerm::Batch) && terms.contains(&ModelTerm::Treatment))
        {
            return Err(Error::Config(
                "the interaction requires both batch and treatment terms".into(),
            ));
        }
        Ok(Self(terms.to_vec()))
    }

    pub fn intercept_only() -> Self {
        Self(vec![ModelTerm::Intercept])
    }

    pub fn batch_only() -> Self {
        Self(vec![ModelTerm::Intercept, ModelTerm::Batch])
    }

    /// Intercept + batch + treatment.
    pub fn additive() -> Self {
        Self(vec![
            ModelTerm::Intercept,
            ModelTerm::Batch,
            ModelTerm::Treatment,
        ])
    }

    /// Intercept + batch + treatment + interaction.
    pub fn full() -> Self {
        Self(vec![
            ModelTerm::Intercept,
            ModelTerm::Batch,
            ModelTerm::Treatment,
            ModelTerm::Interaction,
        ])
    }

    pub fn terms(&self) -> &[ModelTerm] {
        &self.0
    }
}

/// A reference-level dummy-coded design matrix (row-major, entries 0/1).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
    labels: Vec<String>,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.ncols + col]
    }

    fn column(&self, col: usize) -> Vec<f64> {
        (0..self.nrows).map(|r| self.value(r, col)).collect()
    }
}

/// Builds the design matrix for the included rows of `dataset`.
///
/// The reference level of each factor is the lexicographically smallest
/// label; interaction columns are elementwise products of the main-effect
/// columns. Term-list validity (non-empty, intercept first, interaction
/// needs both mains) is enforced by [`ModelTerms::new`].
pub fn encode(dataset: &Dataset, terms: &ModelTerms) -> DesignMatrix {
    let summary = summarize_design(dataset);
    let treatments = &summary.treatments;
    let batches = &summary.batches;

    let mut labels: Vec<String> = Vec::new();
    for term in terms.terms() {
        match term {
            ModelTerm::Intercept => labels.push("intercept".into()),
            ModelTerm::Batch => {
                for level in &batches[1..] {
                    labels.push(format!("batch[{level}]"));
                }
            }
            ModelTerm::Treatment => {
                for level in &treatments[1..] {
                    labels.push(format!("treatment[{level}]"));
                }
            }
            ModelTerm::Interaction => {
                for t_level in &treatments[1..] {
                    for b_level in &batches[1..] {
                        labels.push(format!("treatment[{t_level}]:batch[{b_level}]"));
                    }
                }
            }
        }
    }

    let nrows = summary.n;
    let ncols = labels.len();
    let mut data = vec![0.0; nrows * ncols];
    for (r, obs) in dataset.included().enumerate() {
        let mut c = 0;
        for term in terms.terms() {
            match term {
                ModelTerm::Intercept => {
                    data[r * ncols + c] = 1.0;
                    c += 1;
                }
                ModelTerm::Batch => {
                    for level in &batches[1..] {
                        data[r * ncols + c] = f64::from(obs.batch() == level);
                        c += 1;
                    }
                }
                ModelTerm::Treatment => {
                    for level in &treatments[1..] {
                        data[r * ncols + c] = f64::from(obs.treatment() == level);
                        c += 1;
                    }
                }
                ModelTerm::Interaction => {
                    for t_level in &treatments[1..] {
                        for b_level in &batches[1..] {
                            data[r * ncols + c] =
                                f64::from(obs.treatment() == t_level && obs.batch() == b_level);
                            c += 1;
                        }
                    }
                }
            }
        }
    }

    DesignMatrix {
        nrows,
        ncols,
        data,
        labels,
    }
}

/// Result of a least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// One coefficient per design-matrix column; dropped (dependent) columns
    /// get 0.
    pub coefficients: Vec<f64>,
    pub residual_ss: f64,
    pub df_residual: usize,
    pub rank: usize,
}

/// Householder QR with dependent-column rejection at [`RANK_TOL`].
///
/// The factorization depends only on the design matrix, so one factor can
/// cheaply produce residual sums of squares for many outcome vectors.
#[derive(Debug, Clone)]
struct QrFactor {
    n: usize,
    p: usize,
    /// Reflector k acts on rows k.., stored with its squared norm.
    reflectors: Vec<(Vec<f64>, f64)>,
    /// Column k of R (length k+1), for kept columns only.
    r_columns: Vec<Vec<f64>>,
    /// Original indices of kept columns.
    kept: Vec<usize>,
}

impl QrFactor {
    fn new(x: &DesignMatrix) -> Self {
        let n = x.nrows();
        let p = x.ncols();
        let mut reflectors: Vec<(Vec<f64>, f64)> = Vec::with_capacity(p);
        let mut r_columns: Vec<Vec<f64>> = Vec::with_capacity(p);
        let mut kept: Vec<usize> = Vec::with_capacity(p);

        for j in 0..p {
            let mut c = x.column(j);
            let orig_norm = norm(&c);
            for (k, (v, v_sq)) in reflectors.iter().enumerate() {
                apply_reflector(v, *v_sq, &mut c[k..]);
            }
            let k = kept.len();
            let resid_norm = norm(&c[k..]);
            if orig_norm == 0.0 || resid_norm <= RANK_TOL * orig_norm {
                continue; // dependent column: dropped
            }
            if k >= n {
                continue; // no rows left to orthogonalize against
            }
            let mut v = c[k..].to_vec();
            let alpha = -v[0].signum() * resid_norm;
            v[0] -= alpha;
            let v_sq: f64 = v.iter().map(|x| x * x).sum();
            let mut r_col = c[..k].to_vec();
            r_col.push(alpha);
            reflectors.push((v, v_sq));
            r_columns.push(r_col);
            kept.push(j);
        }

        Self {
            n,
            p,
            reflectors,
            r_columns,
            kept,
        }
    }

    fn rank(&self) -> usize {
        self.kept.len()
    }

    fn apply_qt(&self, y: &mut [f64]) {
        for (k, (v, v_sq)) in self.reflectors.iter().enumerate() {
            apply_reflector(v, *v_sq, &mut y[k..]);
        }
    }

    fn residual_ss(&self, y: &[f64]) -> f64 {
        let mut z = y.to_vec();
        self.apply_qt(&mut z);
        z[self.rank()..].iter().map(|v| v * v).sum()
    }

    fn fit(&self, y: &[f64]) -> FitResult {
        let mut z = y.to_vec();
        self.apply_qt(&mut z);
        let rank = self.rank();
        let residual_ss: f64 = z[rank..].iter().map(|v| v * v).sum();

        // Back-substitution on the kept columns of R.
        let mut beta_kept = vec![0.0; rank];
        for k in (0..rank).rev() {
            let mut acc = z[k];
            for m in (k + 1)..rank {
                acc -= self.r_columns[m][k] * beta_kept[m];
            }
            beta_kept[k] = acc / self.r_columns[k][k];
        }
        let mut coefficients = vec![0.0; self.p];
        for (k, &j) in self.kept.iter().enumerate() {
            coefficients[j] = beta_kept[k];
        }

        FitResult {
            coefficients,
            residual_ss,
            df_residual: self.n - rank,
            rank,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn apply_reflector(v: &[f64], v_sq: f64, y: &mut [f64]) {
    let dot: f64 = v.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
    let scale = 2.0 * dot / v_sq;
    for (yi, vi) in y.iter_mut().zip(v.iter()) {
        *yi -= scale * vi;
    }
}

/// Least-squares fit of `y` on the columns of `x` via Householder QR.
///
/// Rank-deficient inputs are resolved by dropping dependent columns at
/// [`RANK_TOL`]; dropped columns get coefficient 0.
pub fn fit_ols(x: &DesignMatrix, y: &[f64]) -> Result<FitResult> {
    if x.nrows() == 0 {
        return Err(Error::Domain("design matrix has zero rows".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::Config(format!(
            "design matrix has {} rows but the outcome vector has {}",
            x.nrows(),
            y.len()
        )));
    }
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite outcome value {bad}")));
    }
    Ok(QrFactor::new(x).fit(y))
}

/// Terms of the decomposition, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnovaTerm {
    Batch,
    Treatment,
    Interaction,
    Error,
}

impl AnovaTerm {
    pub fn display_name(self) -> &'static str {
        match self {
            AnovaTerm::Batch => "Batch",
            AnovaTerm::Treatment => "Treatment",
            AnovaTerm::Interaction => "Treatment\u{d7}Batch",
            AnovaTerm::Error => "Error",
        }
    }
}

/// Degrees of freedom and sum of squares for one term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSummary {
    pub term: AnovaTerm,
    pub df: usize,
    pub ss: f64,
}

/// Sequential sums of squares for batch, treatment, interaction, and error,
/// plus the corrected total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsDecomposition {
    /// Entries in order: batch, treatment, interaction, error.
    pub terms: Vec<TermSummary>,
    /// Corrected total (about the grand mean).
    pub total_ss: f64,
}

impl SsDecomposition {
    pub fn get(&self, term: AnovaTerm) -> &TermSummary {
        self.terms.iter().find(|t| t.term == term).unwrap()
    }
}

/// Precomputed factorizations of the nested model sequence for one dataset.
///
/// The design matrices are fixed by the labels, so the decomposition of any
/// outcome vector (for example a within-batch permutation of the observed
/// one) costs only a few reflector applications.
pub struct SequentialEngine {
    n: usize,
    t: usize,
    b: usize,
    q_batch: QrFactor,
    q_additive: QrFactor,
    q_full: QrFactor,
}

impl SequentialEngine {
    pub fn new(dataset: &Dataset) -> Result<Self> {
        let summary = summarize_design(dataset);
        if !summary.genuine_replication {
            let missing = if summary.fully_crossed {
                "some treatment-by-batch cells have fewer than 2 replicates"
            } else {
                "some treatment-by-batch cells are empty"
            };
            return Err(Error::GenuineReplication(format!(
                "{missing}; the interaction sum of squares is undefined"
            )));
        }
        let q_batch = QrFactor::new(&encode(dataset, &ModelTerms::batch_only()));
        let q_additive = QrFactor::new(&encode(dataset, &ModelTerms::additive()));
        let q_full = QrFactor::new(&encode(dataset, &ModelTerms::full()));
        if q_full.rank() != summary.t * summary.b {
            return Err(Error::Precision(format!(
                "full-model rank {} does not match t*b = {}",
                q_full.rank(),
                summary.t * summary.b
            )));
        }
        debug_assert_eq!(q_batch.rank(), summary.b);
        debug_assert_eq!(q_additive.rank(), summary.b + summary.t - 1);
        Ok(Self {
            n: summary.n,
            t: summary.t,
            b: summary.b,
            q_batch,
            q_additive,
            q_full,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Type I decomposition of an outcome vector in included-row order.
    pub fn decompose(&self, y: &[f64]) -> SsDecomposition {
        debug_assert_eq!(y.len(), self.n);
        // Every model contains the intercept, so residual sums of squares
        // are unchanged by centering; doing it up front keeps the
        // factorizations well-conditioned when |mean| dwarfs the spread.
        let mean = y.iter().sum::<f64>() / self.n as f64;
        let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
        let total_ss: f64 = centered.iter().map(|v| v * v).sum();
        let rss_batch = self.q_batch.residual_ss(&centered);
        let rss_additive = self.q_additive.residual_ss(&centered);
        let rss_full = self.q_full.residual_ss(&centered);

        // Reflector round-off leaves ~eps^2-scale crumbs where a sum of
        // squares is mathematically zero (e.g. constant outcomes); snap
        // those to 0 so degenerate data is detected as such.
        let snap = 1e-24 * y.iter().map(|v| v * v).sum::<f64>();
        let clean = |ss: f64| if ss <= snap { 0.0 } else { ss };

        let terms = vec![
            TermSummary {
                term: AnovaTerm::Batch,
                df: self.b - 1,
                ss: clean((total_ss - rss_batch).max(0.0)),
            },
            TermSummary {
                term: AnovaTerm::Treatment,
                df: self.t - 1,
                ss: clean((rss_batch - rss_additive).max(0.0)),
            },
            TermSummary {
                term: AnovaTerm::Interaction,
                df: (self.t - 1) * (self.b - 1),
                ss: clean((rss_additive - rss_full).max(0.0)),
            },
            TermSummary {
                term: AnovaTerm::Error,
                df: self.n - self.t * self.b,
                ss: clean(rss_full),
            },
        ];
        SsDecomposition {
            terms,
            total_ss: clean(total_ss),
        }
    }
}

/// Type I (sequential) sums of squares in the fixed order
/// batch → treatment → interaction, with error from the full model.
///
/// Requires genuine replication (every cell ≥ 2); without it the interaction
/// sum of squares is signalled as undefined.
pub fn sequential_ss(dataset: &Dataset) -> Result<SsDecomposition> {
    let engine = SequentialEngine::new(dataset)?;
    Ok(engine.decompose(&dataset.included_outcomes()))
}
