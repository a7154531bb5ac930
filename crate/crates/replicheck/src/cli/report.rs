//! Analysis orchestration and report rendering (text and JSON).

use crate::anova::{
    complete_table, format_amount, format_f, format_p, grbd_anova, reproducibility_verdict,
    AnovaTable, Verdict,
};
use crate::cli::csv_input::{parse_csv, parse_summaries, ColumnMapping};
use crate::domain::{
    summarize_design, validate_grbd, Dataset, DesignSummary, ReplicationClass, ValidationReport,
};
use crate::effects::{effect_heterogeneity, per_batch_effects, EffectSet, HeterogeneitySummary};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Version tag of the JSON report schema.
pub const SCHEMA_VERSION: &str = "replicheck/1";

/// Where the numbers came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub input: String,
    pub total_rows: usize,
    pub included: usize,
    pub excluded: usize,
    pub tool_version: String,
}

impl Provenance {
    fn from_dataset(input: &str, dataset: &Dataset) -> Self {
        Self {
            input: input.to_owned(),
            total_rows: dataset.observations().len(),
            included: dataset.n_included(),
            excluded: dataset.n_excluded(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        }
    }
}

/// Knobs of the analysis pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub alpha: f64,
    pub confidence: f64,
    pub reference: Option<String>,
    pub replication_class: Option<ReplicationClass>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            confidence: 0.95,
            reference: None,
            replication_class: None,
        }
    }
}

/// The composite analysis report. Serializes losslessly to the
/// `replicheck/1` JSON schema; unavailable sections are null, with the
/// reason recorded in `notes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema: String,
    pub provenance: Provenance,
    pub design: Option<DesignSummary>,
    pub validation: Option<ValidationReport>,
    pub anova: AnovaTable,
    pub effects: Option<EffectSet>,
    pub heterogeneity: Option<HeterogeneitySummary>,
    pub verdict: Verdict,
    pub replication_class: Option<ReplicationClass>,
    pub notes: Vec<String>,
}

/// Full pipeline on an in-memory dataset:
/// summarize → validate → anova → effects → verdict.
pub fn analyze_dataset(
    dataset: &Dataset,
    options: &AnalysisOptions,
    provenance: Provenance,
) -> Result<AnalysisReport> {
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha must be in (0, 1), got {}",
            options.alpha
        )));
    }
    if !(options.confidence > 0.0 && options.confidence < 1.0) {
        return Err(Error::Config(format!(
            "confidence must be in (0, 1), got {}",
            options.confidence
        )));
    }

    let design = summarize_design(dataset);
    let validation = validate_grbd(&design);
    if !validation.overall {
        let reasons: Vec<String> = validation.failures().map(|c| c.message.clone()).collect();
        let msg = reasons.join("; ");
        return Err(if !design.genuine_replication && design.fully_crossed {
            Error::GenuineReplication(msg)
        } else if !design.fully_crossed {
            Error::NotCrossed(msg)
        } else {
            Error::Config(msg)
        });
    }

    let anova = grbd_anova(dataset)?;
    let mut notes: Vec<String> = anova.notes.clone();

    let effects = if design.t == 2 {
        match per_batch_effects(dataset, options.confidence, options.reference.as_deref()) {
            Ok(set) => Some(set),
            Err(Error::DegenerateData(msg)) => {
                notes.push(format!("effect sizes unavailable: {msg}"));
                None
            }
            Err(other) => return Err(other),
        }
    } else {
        notes.push(format!(
            "effect sizes unavailable: supported only for 2 treatment levels (found {})",
            design.t
        ));
        None
    };
    let heterogeneity = effects
        .as_ref()
        .map(|set| effect_heterogeneity(set, &anova));
    let verdict = reproducibility_verdict(&anova, options.alpha);

    Ok(AnalysisReport {
        schema: SCHEMA_VERSION.to_owned(),
        provenance,
        design: Some(design),
        validation: Some(validation),
        anova,
        effects,
        heterogeneity,
        verdict,
        replication_class: options.replication_class.clone(),
        notes,
    })
}

/// Parses a CSV and runs the full pipeline.
pub fn analyze(path: &Path, mapping: &ColumnMapping, options: &AnalysisOptions) -> Result<AnalysisReport> {
    let dataset = parse_csv(path, mapping)?;
    let mut options = options.clone();
    if options.reference.is_none() {
        options.reference = mapping.reference_level.clone();
    }
    let provenance = Provenance::from_dataset(&path.display().to_string(), &dataset);
    analyze_dataset(&dataset, &options, provenance)
}

/// Completes a published table from the summaries JSON input; design,
/// validation, and effects are unavailable without raw data.
pub fn analyze_summaries(path: &Path, alpha: f64) -> Result<AnalysisReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let (terms, n) = parse_summaries(path)?;
    let anova = complete_table(&terms, n)?;
    let mut notes = anova.notes.clone();
    notes.push("design, validation, and effect sections unavailable: input was term summaries, not raw data".into());
    let verdict = reproducibility_verdict(&anova, alpha);
    Ok(AnalysisReport {
        schema: SCHEMA_VERSION.to_owned(),
        provenance: Provenance {
            input: path.display().to_string(),
            total_rows: 0,
            included: n,
            excluded: 0,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        },
        design: None,
        validation: None,
        anova,
        effects: None,
        heterogeneity: None,
        verdict,
        replication_class: None,
        notes,
    })
}

/// UTF-8 JSON with stable key order and full-precision numbers; rounding is
/// display-only. Never emits NaN: unavailable values are null with the
/// reason in `notes`.
pub fn render_json(report: &AnalysisReport) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(report)
        .map_err(|e| Error::Precision(format!("JSON serialization failed: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn pad(s: &str, width: usize) -> String {
    format!("{s:>width$}")
}

fn render_table_block(table: &AnovaTable) -> String {
    let headers = ["Term", "df", "SS", "MS", "F(Err)", "P(Err)", "F(TxB)", "P(TxB)"];
    let mut rows: Vec<[String; 8]> = Vec::new();
    for row in &table.rows {
        let opt_f = |v: Option<f64>| v.map(format_f).unwrap_or_default();
        let opt_p = |v: Option<crate::special::Probability>| {
            v.map(|p| format_p(p.value())).unwrap_or_default()
        };
        rows.push([
            row.term.display_name().to_owned(),
            row.df.to_string(),
            format_amount(row.ss),
            format_amount(row.ms),
            opt_f(row.f_error),
            opt_p(row.p_error),
            opt_f(row.f_interaction_denom),
            opt_p(row.p_interaction_denom),
        ]);
    }
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row.iter()) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let fmt_line = |cells: &[String]| -> String {
        let mut line = format!("  {:<width$}", cells[0], width = widths[0]);
        for (cell, w) in cells.iter().zip(widths.iter()).skip(1) {
            line.push_str("  ");
            line.push_str(&pad(cell, *w));
        }
        line.push('\n');
        line
    };
    out.push_str(&fmt_line(
        &headers.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
    ));
    for row in &rows {
        out.push_str(&fmt_line(row.as_slice()));
    }
    out
}

fn render_effects_block(set: &EffectSet) -> String {
    let headers = ["Batch", "n(ref)", "n(trt)", "diff", "se", "low", "high"];
    let fmt_val = |v: f64| format!("{v:.4}");
    let mut rows: Vec<[String; 7]> = Vec::new();
    for effect in set.per_batch.iter().chain(std::iter::once(&set.overall)) {
        rows.push([
            effect.batch.clone(),
            effect.n_control.to_string(),
            effect.n_treated.to_string(),
            fmt_val(effect.diff),
            fmt_val(effect.se),
            fmt_val(effect.ci_low),
            fmt_val(effect.ci_high),
        ]);
    }
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row.iter()) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let fmt_line = |cells: &[String]| -> String {
        let mut line = format!("  {:<width$}", cells[0], width = widths[0]);
        for (cell, w) in cells.iter().zip(widths.iter()).skip(1) {
            line.push_str("  ");
            line.push_str(&pad(cell, *w));
        }
        line.push('\n');
        line
    };
    out.push_str(&fmt_line(
        &headers.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
    ));
    for row in &rows {
        out.push_str(&fmt_line(row.as_slice()));
    }
    out
}

/// Fixed-width text report. Numbers follow the display rules: F to one
/// decimal, p to three with a "<0.001" floor; columns widen to fit long
/// labels, never truncate.
pub fn render_text(report: &AnalysisReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("replicheck report — {}\n", report.provenance.input));
    out.push_str(&format!(
        "rows: {} total, {} included, {} excluded (tool v{})\n",
        report.provenance.total_rows,
        report.provenance.included,
        report.provenance.excluded,
        report.provenance.tool_version
    ));

    if let Some(design) = &report.design {
        out.push_str("\ndesign\n");
        out.push_str(&format!(
            "  treatments (t = {}): {}\n",
            design.t,
            design.treatments.join(", ")
        ));
        out.push_str(&format!(
            "  batches (b = {}): {}\n",
            design.b,
            design.batches.join(", ")
        ));
        out.push_str(&format!(
            "  N = {}, balanced: {}, fully crossed: {}, genuine replication: {}\n",
            design.n,
            yes_no(design.balanced),
            yes_no(design.fully_crossed),
            yes_no(design.genuine_replication)
        ));
        out.push_str("  cell counts (treatment x batch):\n");
        for (i, row) in design.cell_counts.iter().enumerate() {
            out.push_str(&format!(
                "    {}: {}\n",
                design.treatments[i],
                row.iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            ));
        }
    }

    if let Some(validation) = &report.validation {
        out.push_str("\nvalidation\n");
        for check in &validation.checks {
            let tag = if !check.passed {
                "FAIL"
            } else if check.warning {
                "warn"
            } else {
                "pass"
            };
            out.push_str(&format!("  [{tag}] {}: {}\n", check.name, check.message));
        }
        out.push_str(&format!("  overall: {}\n", if validation.overall { "pass" } else { "FAIL" }));
    }

    out.push_str("\nanova\n");
    out.push_str(&render_table_block(&report.anova));

    if let Some(effects) = &report.effects {
        out.push_str(&format!(
            "\neffects ({:.0}% CI, reference = {})\n",
            effects.confidence * 100.0,
            effects.reference
        ));
        out.push_str(&render_effects_block(effects));
        if let Some(h) = &report.heterogeneity {
            out.push_str(&format!(
                "  heterogeneity: range = {:.4}, sd = {:.4}, interaction p = {}; {}\n",
                h.range,
                h.sd,
                h.interaction_p
                    .map(|p| format_p(p.value()))
                    .unwrap_or_else(|| "unavailable".into()),
                h.note
            ));
        }
    }

    if let Some(class) = &report.replication_class {
        out.push_str(&format!(
            "\nreplication type: panel {} — {}\n",
            class.figure_panel, class.label
        ));
    }

    out.push_str(&format!("\nverdict (alpha = {})\n  {}\n", report.verdict.alpha, report.verdict.narrative));

    if !report.notes.is_empty() {
        out.push_str("\nnotes\n");
        for note in &report.notes {
            out.push_str(&format!("  - {note}\n"));
        }
    }
    out
}

fn yes_no(v: bool) -> &'static str {
    if v {
        "yes"
    } else {
        "no"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Observation;
    use crate::linmodel::AnovaTerm;
    use std::io::Write;

    fn demo_dataset() -> Dataset {
        let rows = [
            (10.0, "C", "B1"),
            (12.0, "C", "B1"),
            (20.0, "T", "B1"),
            (22.0, "T", "B1"),
            (11.0, "C", "B2"),
            (13.0, "C", "B2"),
            (25.0, "T", "B2"),
            (27.0, "T", "B2"),
        ];
        let obs = rows
            .iter()
            .map(|&(y, t, b)| Observation::new(y, t, b).unwrap())
            .collect();
        Dataset::new("demo", obs).unwrap()
    }

    fn demo_provenance() -> Provenance {
        Provenance {
            input: "demo.csv".into(),
            total_rows: 8,
            included: 8,
            excluded: 0,
            tool_version: "test".into(),
        }
    }

    #[test]
    fn report_composes_pipeline() {
        let report =
            analyze_dataset(&demo_dataset(), &AnalysisOptions::default(), demo_provenance())
                .unwrap();
        let direct = grbd_anova(&demo_dataset()).unwrap();
        assert_eq!(report.anova, direct);
        assert!(report.design.is_some());
        assert!(report.effects.is_some());
        assert!(report.heterogeneity.is_some());
        assert_eq!(report.schema, SCHEMA_VERSION);
    }

    #[test]
    fn report_rejects_bad_options() {
        let d = demo_dataset();
        let mut opts = AnalysisOptions::default();
        opts.alpha = 0.0;
        assert!(analyze_dataset(&d, &opts, demo_provenance()).is_err());
        let mut opts = AnalysisOptions::default();
        opts.confidence = 1.0;
        assert!(analyze_dataset(&d, &opts, demo_provenance()).is_err());
    }

    #[test]
    fn singleton_cells_fail_validation_with_reason() {
        let rows = [
            (1.0, "C", "B1"),
            (2.0, "T", "B1"),
            (3.0, "C", "B2"),
            (4.0, "T", "B2"),
        ];
        let obs = rows
            .iter()
            .map(|&(y, t, b)| Observation::new(y, t, b).unwrap())
            .collect();
        let d = Dataset::new("thin", obs).unwrap();
        match analyze_dataset(&d, &AnalysisOptions::default(), demo_provenance()) {
            Err(Error::GenuineReplication(msg)) => {
                assert!(msg.contains("fewer than 2 replicates"), "{msg}");
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn three_treatments_drop_effects_with_note() {
        let mut rows = Vec::new();
        for t in ["A", "B", "C"] {
            for b in ["B1", "B2"] {
                for k in 0..3 {
                    rows.push(Observation::new(k as f64 + t.len() as f64, t, b).unwrap());
                }
            }
        }
        let d = Dataset::new("three", rows).unwrap();
        let report =
            analyze_dataset(&d, &AnalysisOptions::default(), demo_provenance()).unwrap();
        assert!(report.effects.is_none());
        assert!(report
            .notes
            .iter()
            .any(|n| n.contains("effect sizes unavailable")));
    }

    #[test]
    fn json_round_trip() {
        let report =
            analyze_dataset(&demo_dataset(), &AnalysisOptions::default(), demo_provenance())
                .unwrap();
        let bytes = render_json(&report).unwrap();
        let parsed: AnalysisReport = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(parsed, report);
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("\"schema\": \"replicheck/1\""));
        assert!(!text.contains("NaN"));
    }

    #[test]
    fn summaries_mode_renders_published_strings() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(
            br#"{"n": 438, "terms": [
                {"name": "Site", "df": 2, "ss": 2399368},
                {"name": "Treatment", "df": 1, "ss": 533121},
                {"name": "SxT", "df": 2, "ss": 425825},
                {"name": "Error", "df": 432, "ss": 24434637}
            ]}"#,
        )
        .unwrap();
        let report = analyze_summaries(f.path(), 0.05).unwrap();
        let text = render_text(&report);
        for expected in ["21.2", "<0.001", "9.4", "0.002", "3.8", "0.024", "2.5", "0.254"] {
            assert!(text.contains(expected), "missing {expected} in:\n{text}");
        }
        assert!(report.design.is_none());
        assert!(report.verdict.interaction_significant);
    }

    #[test]
    fn text_report_omits_empty_effects_and_widens_labels() {
        let rows = [
            (10.0, "control", "a-very-long-batch-label-indeed"),
            (12.0, "control", "a-very-long-batch-label-indeed"),
            (20.0, "treated", "a-very-long-batch-label-indeed"),
            (22.0, "treated", "a-very-long-batch-label-indeed"),
            (11.0, "control", "short"),
            (13.0, "control", "short"),
            (25.0, "treated", "short"),
            (27.0, "treated", "short"),
        ];
        let obs = rows
            .iter()
            .map(|&(y, t, b)| Observation::new(y, t, b).unwrap())
            .collect();
        let d = Dataset::new("long", obs).unwrap();
        let report =
            analyze_dataset(&d, &AnalysisOptions::default(), demo_provenance()).unwrap();
        let text = render_text(&report);
        assert!(text.contains("a-very-long-batch-label-indeed"));

        // Summaries-mode report has no effects section.
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(
            br#"{"n": 8, "terms": [
                {"name": "batch", "df": 1, "ss": 18},
                {"name": "treatment", "df": 1, "ss": 288},
                {"name": "interaction", "df": 1, "ss": 8},
                {"name": "error", "df": 4, "ss": 8}
            ]}"#,
        )
        .unwrap();
        let summary_report = analyze_summaries(f.path(), 0.05).unwrap();
        assert!(!render_text(&summary_report).contains("\neffects"));
    }

    #[test]
    fn text_and_json_agree_on_rendered_numbers() {
        let report =
            analyze_dataset(&demo_dataset(), &AnalysisOptions::default(), demo_provenance())
                .unwrap();
        let text = render_text(&report);
        let treatment = report.anova.row(AnovaTerm::Treatment);
        assert!(text.contains(&format_f(treatment.f_error.unwrap())));
        assert!(text.contains(&format_p(treatment.p_error.unwrap().value())));
    }
}
