//! Command-line surface: CSV ingestion, analysis orchestration, text/JSON
//! report rendering, and SVG plot emission.

pub mod csv_input;
pub mod report;
pub mod svg;

pub use csv_input::{parse_csv, parse_summaries, ColumnMapping};
pub use report::{
    analyze, analyze_dataset, analyze_summaries, render_json, render_text, AnalysisOptions,
    AnalysisReport, Provenance, SCHEMA_VERSION,
};
pub use svg::{render_forest, render_strip, write_svg, PlotKind};
