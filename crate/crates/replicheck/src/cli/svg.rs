//! Self-contained SVG 1.1 plots: a per-batch strip plot of the raw data and
//! a forest plot of per-batch effects. Output is deterministic for a fixed
//! input and seed (point jitter is seeded).

use crate::domain::{summarize_design, Dataset};
use crate::effects::EffectSet;
use crate::error::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    /// Raw data by batch, points grouped and coloured by treatment.
    Strip,
    /// Per-batch difference ± CI with a zero line and the pooled estimate.
    Forest,
}

const WIDTH: f64 = 640.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&#39;")
}

fn fmt(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Nice round tick values covering [lo, hi].
fn ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw_step = span / count as f64;
    let mag = 10f64.powf(raw_step.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= count as f64)
        .unwrap_or(mag * 10.0);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span {
        out.push(t);
        t += step;
    }
    out
}

fn svg_header(height: f64, title: &str) -> String {
    format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" "#,
            r#"viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
            "\n",
            r#"<rect width="100%" height="100%" fill="white"/>"#,
            "\n",
            r#"<text x="{tx}" y="22" font-size="14" text-anchor="middle">{title}</text>"#,
            "\n"
        ),
        w = WIDTH,
        h = height,
        tx = WIDTH / 2.0,
        title = escape_xml(title),
    )
}

/// Strip plot: one jittered point per included observation, grouped by batch
/// on the x axis and coloured by treatment.
pub fn render_strip(dataset: &Dataset, seed: u64) -> String {
    let summary = summarize_design(dataset);
    let height = 420.0;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = height - MARGIN_TOP - MARGIN_BOTTOM;

    let ys: Vec<f64> = dataset.included_outcomes();
    let mut lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    let y_of = |v: f64| MARGIN_TOP + plot_h * (1.0 - (v - lo) / (hi - lo));

    let group_w = plot_w / summary.b as f64;
    let t_count = summary.t as f64;
    let x_of = |batch_idx: usize, treat_idx: usize, jitter: f64| {
        let center = MARGIN_LEFT + group_w * (batch_idx as f64 + 0.5);
        let offset = (treat_idx as f64 - (t_count - 1.0) / 2.0) * group_w / (t_count + 1.0);
        center + offset + jitter
    };

    let fills = ["white", "#8c8c8c", "#4d4d4d", "#bfbfbf"];
    let mut out = svg_header(height, &format!("Raw data by batch — {}", dataset.name()));

    // Axes and ticks.
    out.push_str(&format!(
        r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#,
        x0 = MARGIN_LEFT,
        y0 = MARGIN_TOP,
        y1 = MARGIN_TOP + plot_h
    ));
    out.push('\n');
    for tick in ticks(lo, hi, 6) {
        let y = y_of(tick);
        out.push_str(&format!(
            concat!(
                r#"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="black"/>"#,
                r#"<text x="{tx}" y="{ty}" font-size="11" text-anchor="end">{label}</text>"#,
                "\n"
            ),
            x0 = MARGIN_LEFT - 4.0,
            x1 = MARGIN_LEFT,
            y = fmt(y),
            tx = MARGIN_LEFT - 7.0,
            ty = fmt(y + 4.0),
            label = fmt(tick),
        ));
    }
    for (j, batch) in summary.batches.iter().enumerate() {
        out.push_str(&format!(
            r#"<text x="{x}" y="{y}" font-size="12" text-anchor="middle">{label}</text>"#,
            x = fmt(MARGIN_LEFT + group_w * (j as f64 + 0.5)),
            y = height - MARGIN_BOTTOM + 20.0,
            label = escape_xml(batch),
        ));
        out.push('\n');
    }

    // Points, jittered; one circle per included observation.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter_w = group_w / (t_count + 1.0) * 0.35;
    let mut cell_sums = vec![vec![(0.0f64, 0usize); summary.b]; summary.t];
    for obs in dataset.included() {
        let i = summary
            .treatments
            .iter()
            .position(|t| t == obs.treatment())
            .unwrap();
        let j = summary
            .batches
            .iter()
            .position(|b| b == obs.batch())
            .unwrap();
        let jitter = rng.gen_range(-1.0..1.0) * jitter_w;
        cell_sums[i][j].0 += obs.outcome();
        cell_sums[i][j].1 += 1;
        out.push_str(&format!(
            r##"<circle class="pt" cx="{cx}" cy="{cy}" r="3" fill="{fill}" stroke="#333" stroke-width="0.6" fill-opacity="0.8"/>"##,
            cx = fmt(x_of(j, i, jitter)),
            cy = fmt(y_of(obs.outcome())),
            fill = fills[i % fills.len()],
        ));
        out.push('\n');
    }

    // Cell mean ticks.
    for (i, row) in cell_sums.iter().enumerate() {
        for (j, &(sum, count)) in row.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let mean = sum / count as f64;
            let x = x_of(j, i, 0.0);
            out.push_str(&format!(
                r#"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="black" stroke-width="1.5"/>"#,
                x0 = fmt(x - jitter_w - 4.0),
                x1 = fmt(x + jitter_w + 4.0),
                y = fmt(y_of(mean)),
            ));
            out.push('\n');
        }
    }

    // Legend.
    for (i, treatment) in summary.treatments.iter().enumerate() {
        let x = MARGIN_LEFT + 12.0 + 110.0 * i as f64;
        out.push_str(&format!(
            concat!(
                r##"<circle cx="{cx}" cy="{cy}" r="4" fill="{fill}" stroke="#333" stroke-width="0.6"/>"##,
                r#"<text x="{tx}" y="{ty}" font-size="11">{label}</text>"#,
                "\n"
            ),
            cx = fmt(x),
            cy = MARGIN_TOP - 10.0,
            fill = fills[i % fills.len()],
            tx = fmt(x + 8.0),
            ty = MARGIN_TOP - 6.0,
            label = escape_xml(treatment),
        ));
    }

    out.push_str("</svg>\n");
    out
}

/// Forest plot: per-batch differences with confidence intervals, a dashed
/// zero reference line, and the pooled estimate at the bottom.
pub fn render_forest(effects: &EffectSet) -> String {
    let rows: Vec<&crate::effects::BatchEffect> = effects
        .per_batch
        .iter()
        .chain(std::iter::once(&effects.overall))
        .collect();
    let row_h = 34.0;
    let height = MARGIN_TOP + MARGIN_BOTTOM + row_h * rows.len() as f64;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;

    let mut lo = rows.iter().map(|e| e.ci_low).fold(0.0f64, f64::min);
    let mut hi = rows.iter().map(|e| e.ci_high).fold(0.0f64, f64::max);
    let pad = 0.08 * (hi - lo).max(f64::MIN_POSITIVE);
    lo -= pad;
    hi += pad;
    let x_of = |v: f64| MARGIN_LEFT + plot_w * (v - lo) / (hi - lo);

    let mut out = svg_header(
        height,
        &format!(
            "Per-batch effect (non-reference − {}), {:.0}% CI",
            effects.reference,
            effects.confidence * 100.0
        ),
    );

    // Zero reference line.
    out.push_str(&format!(
        r##"<line x1="{x}" y1="{y0}" x2="{x}" y2="{y1}" stroke="#888" stroke-dasharray="4 3"/>"##,
        x = fmt(x_of(0.0)),
        y0 = MARGIN_TOP,
        y1 = fmt(height - MARGIN_BOTTOM),
    ));
    out.push('\n');

    for (idx, effect) in rows.iter().enumerate() {
        let y = MARGIN_TOP + row_h * (idx as f64 + 0.5);
        let pooled = idx == rows.len() - 1;
        let marker = if pooled {
            format!(
                r#"<rect x="{x}" y="{y}" width="9" height="9" transform="rotate(45 {cx} {cy})" fill="black"/>"#,
                x = fmt(x_of(effect.diff) - 4.5),
                y = fmt(y - 4.5),
                cx = fmt(x_of(effect.diff)),
                cy = fmt(y),
            )
        } else {
            format!(
                r#"<circle cx="{cx}" cy="{cy}" r="4" fill="black"/>"#,
                cx = fmt(x_of(effect.diff)),
                cy = fmt(y),
            )
        };
        out.push_str(&format!(
            concat!(
                r#"<g class="interval">"#,
                r#"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="black" stroke-width="1.5"/>"#,
                r#"<line x1="{x0}" y1="{ya}" x2="{x0}" y2="{yb}" stroke="black" stroke-width="1.5"/>"#,
                r#"<line x1="{x1}" y1="{ya}" x2="{x1}" y2="{yb}" stroke="black" stroke-width="1.5"/>"#,
                "{marker}",
                r#"<text x="{lx}" y="{ly}" font-size="12" text-anchor="end"{weight}>{label}</text>"#,
                "</g>\n"
            ),
            x0 = fmt(x_of(effect.ci_low)),
            x1 = fmt(x_of(effect.ci_high)),
            y = fmt(y),
            ya = fmt(y - 5.0),
            yb = fmt(y + 5.0),
            marker = marker,
            lx = MARGIN_LEFT - 8.0,
            ly = fmt(y + 4.0),
            weight = if pooled { r#" font-weight="bold""# } else { "" },
            label = escape_xml(&effect.batch),
        ));
    }

    // Axis with ticks.
    let axis_y = height - MARGIN_BOTTOM;
    out.push_str(&format!(
        r#"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="black"/>"#,
        x0 = MARGIN_LEFT,
        x1 = fmt(WIDTH - MARGIN_RIGHT),
        y = fmt(axis_y),
    ));
    out.push('\n');
    for tick in ticks(lo, hi, 7) {
        out.push_str(&format!(
            concat!(
                r#"<line x1="{x}" y1="{y0}" x2="{x}" y2="{y1}" stroke="black"/>"#,
                r#"<text x="{x}" y="{ty}" font-size="11" text-anchor="middle">{label}</text>"#,
                "\n"
            ),
            x = fmt(x_of(tick)),
            y0 = fmt(axis_y),
            y1 = fmt(axis_y + 4.0),
            ty = fmt(axis_y + 17.0),
            label = fmt(tick),
        ));
    }

    out.push_str("</svg>\n");
    out
}

/// Writes an already-rendered SVG to disk.
pub fn write_svg(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)?;
    Ok(())
}
