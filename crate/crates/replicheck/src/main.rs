//! replicheck command-line interface.

use clap::{Args, Parser, Subcommand, ValueEnum};
use replicheck::cli::{
    analyze, analyze_summaries, parse_csv, render_forest, render_json, render_strip, render_text,
    write_svg, AnalysisOptions, ColumnMapping, PlotKind,
};
use replicheck::{
    calibration_study, classify_replication, generate_grbd, per_batch_effects, summarize_design,
    validate_grbd, Error, Independence, Result, SimParams, Timing,
};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Used whenever `--seed` is omitted, so every output is reproducible.
const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "replicheck",
    version,
    about = "Internal-replication diagnostics for batched experiments",
    long_about = "Fits a fixed-effects treatment x batch ANOVA, tests the treatment against \
both the error and the interaction mean squares, tests the treatment-by-batch interaction as \
the reproducibility criterion, and reports per-batch effect sizes."
)]
struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a CSV, or complete a published ANOVA table with --from-summaries
    Analyze(AnalyzeArgs),
    /// Check a CSV against the GRBD design requirements
    Validate(ValidateArgs),
    /// Name the replication type from its independence and timing dimensions
    Classify(ClassifyArgs),
    /// Generate synthetic GRBD data and run Monte Carlo calibration studies
    Simulate(SimulateArgs),
    /// Render a strip plot of the raw data or a forest plot of per-batch effects
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum IndependenceArg {
    Full,
    Partial,
}

impl From<IndependenceArg> for Independence {
    fn from(v: IndependenceArg) -> Self {
        match v {
            IndependenceArg::Full => Independence::Full,
            IndependenceArg::Partial => Independence::Partial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum TimingArg {
    Sequential,
    Staggered,
    Parallel,
}

impl From<TimingArg> for Timing {
    fn from(v: TimingArg) -> Self {
        match v {
            TimingArg::Sequential => Timing::Sequential,
            TimingArg::Staggered => Timing::Staggered,
            TimingArg::Parallel => Timing::Parallel,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input CSV with a header row
    #[arg(long)]
    input: Option<PathBuf>,
    /// JSON of published term summaries instead of raw data
    #[arg(long)]
    from_summaries: Option<PathBuf>,
    /// Header name of the outcome column
    #[arg(long)]
    outcome: Option<String>,
    /// Header name of the treatment column
    #[arg(long)]
    treatment: Option<String>,
    /// Header name of the batch column
    #[arg(long)]
    batch: Option<String>,
    /// Header name of an exclusion-flag column (1/true/yes mark excluded)
    #[arg(long)]
    exclude: Option<String>,
    /// Treatment level subtracted in effect sizes (default: smallest label)
    #[arg(long)]
    reference: Option<String>,
    /// Significance level [default: 0.05]
    #[arg(long)]
    alpha: Option<f64>,
    /// Confidence level for effect intervals [default: 0.95]
    #[arg(long)]
    confidence: Option<f64>,
    /// Batch independence (metadata for the replication type)
    #[arg(long, value_enum)]
    independence: Option<IndependenceArg>,
    /// Batch timing (metadata for the replication type)
    #[arg(long, value_enum)]
    timing: Option<TimingArg>,
    /// Output format [default: text]
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Write output here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config whose keys mirror these flags 1:1; flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct AnalyzeConfig {
    input: Option<PathBuf>,
    from_summaries: Option<PathBuf>,
    outcome: Option<String>,
    treatment: Option<String>,
    batch: Option<String>,
    exclude: Option<String>,
    reference: Option<String>,
    alpha: Option<f64>,
    confidence: Option<f64>,
    independence: Option<IndependenceArg>,
    timing: Option<TimingArg>,
    format: Option<OutputFormat>,
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Input CSV with a header row
    #[arg(long)]
    input: Option<PathBuf>,
    /// Header name of the outcome column
    #[arg(long)]
    outcome: Option<String>,
    /// Header name of the treatment column
    #[arg(long)]
    treatment: Option<String>,
    /// Header name of the batch column
    #[arg(long)]
    batch: Option<String>,
    /// Header name of an exclusion-flag column
    #[arg(long)]
    exclude: Option<String>,
    /// Output format [default: text]
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// JSON config whose keys mirror these flags 1:1; flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ValidateConfig {
    input: Option<PathBuf>,
    outcome: Option<String>,
    treatment: Option<String>,
    batch: Option<String>,
    exclude: Option<String>,
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Batch independence
    #[arg(long, value_enum)]
    independence: Option<IndependenceArg>,
    /// Batch timing
    #[arg(long, value_enum)]
    timing: Option<TimingArg>,
    /// Output format [default: text]
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// JSON config whose keys mirror these flags 1:1; flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ClassifyConfig {
    independence: Option<IndependenceArg>,
    timing: Option<TimingArg>,
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Treatment levels [default: 2]
    #[arg(long)]
    t: Option<usize>,
    /// Batch levels [default: 3]
    #[arg(long)]
    b: Option<usize>,
    /// Replicates per cell [default: 10]
    #[arg(long)]
    r: Option<usize>,
    /// Comma-separated treatment effects, one per level [default: zeros]
    #[arg(long, allow_hyphen_values = true)]
    treatment_effects: Option<String>,
    /// Comma-separated batch effects, one per level [default: zeros]
    #[arg(long, allow_hyphen_values = true)]
    batch_effects: Option<String>,
    /// Spread of the per-cell interaction draws [default: 0]
    #[arg(long)]
    interaction_sd: Option<f64>,
    /// Error standard deviation [default: 1]
    #[arg(long)]
    sigma: Option<f64>,
    /// RNG seed [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// Calibration replicates [default: 1000]
    #[arg(long)]
    n_sims: Option<usize>,
    /// Significance level [default: 0.05]
    #[arg(long)]
    alpha: Option<f64>,
    /// Skip calibration; write one generated dataset as CSV here
    #[arg(long)]
    emit_data: Option<PathBuf>,
    /// Output format [default: text]
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// JSON config whose keys mirror these flags 1:1; flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct SimulateConfig {
    t: Option<usize>,
    b: Option<usize>,
    r: Option<usize>,
    treatment_effects: Option<String>,
    batch_effects: Option<String>,
    interaction_sd: Option<f64>,
    sigma: Option<f64>,
    seed: Option<u64>,
    n_sims: Option<usize>,
    alpha: Option<f64>,
    emit_data: Option<PathBuf>,
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct PlotArgs {
    /// Input CSV with a header row
    #[arg(long)]
    input: Option<PathBuf>,
    /// Header name of the outcome column
    #[arg(long)]
    outcome: Option<String>,
    /// Header name of the treatment column
    #[arg(long)]
    treatment: Option<String>,
    /// Header name of the batch column
    #[arg(long)]
    batch: Option<String>,
    /// Header name of an exclusion-flag column
    #[arg(long)]
    exclude: Option<String>,
    /// strip (raw data by batch) or forest (per-batch effects)
    #[arg(long, value_enum)]
    kind: Option<PlotKind>,
    /// Output SVG path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Jitter seed [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// Reference treatment level for the forest plot
    #[arg(long)]
    reference: Option<String>,
    /// Confidence level for the forest plot [default: 0.95]
    #[arg(long)]
    confidence: Option<f64>,
    /// JSON config whose keys mirror these flags 1:1; flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct PlotConfig {
    input: Option<PathBuf>,
    outcome: Option<String>,
    treatment: Option<String>,
    batch: Option<String>,
    exclude: Option<String>,
    kind: Option<PlotKind>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    reference: Option<String>,
    confidence: Option<f64>,
}

fn load_config<T: Default + for<'de> Deserialize<'de>>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))
        }
    }
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("missing required flag --{flag}")))
}

fn mapping_from(
    outcome: Option<String>,
    treatment: Option<String>,
    batch: Option<String>,
    exclude: Option<String>,
    reference: Option<String>,
) -> Result<ColumnMapping> {
    let mut mapping = ColumnMapping::new(
        &require(outcome, "outcome")?,
        &require(treatment, "treatment")?,
        &require(batch, "batch")?,
    )?;
    if let Some(col) = exclude {
        mapping = mapping.with_exclude(&col)?;
    }
    if let Some(level) = reference {
        mapping = mapping.with_reference(&level);
    }
    Ok(mapping)
}

fn emit(text_or_json: Vec<u8>, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text_or_json)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&text_or_json)?;
        }
    }
    Ok(())
}

fn parse_effect_list(text: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{what}: '{v}' is not numeric")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != expected {
        return Err(Error::Config(format!(
            "{what}: expected {expected} comma-separated values, got {}",
            values.len()
        )));
    }
    Ok(values)
}

fn run_analyze(args: AnalyzeArgs) -> Result<()> {
    let cfg: AnalyzeConfig = load_config(&args.config)?;
    let alpha = args.alpha.or(cfg.alpha).unwrap_or(0.05);
    let format = args.format.or(cfg.format).unwrap_or(OutputFormat::Text);
    let out = args.out.or(cfg.out);

    let report = match args.from_summaries.or(cfg.from_summaries) {
        Some(path) => analyze_summaries(&path, alpha)?,
        None => {
            let input = require(args.input.or(cfg.input), "input")?;
            let mapping = mapping_from(
                args.outcome.or(cfg.outcome),
                args.treatment.or(cfg.treatment),
                args.batch.or(cfg.batch),
                args.exclude.or(cfg.exclude),
                args.reference.or(cfg.reference),
            )?;
            let independence = args.independence.or(cfg.independence);
            let timing = args.timing.or(cfg.timing);
            let replication_class = match (independence, timing) {
                (Some(i), Some(t)) => Some(classify_replication(i.into(), t.into())),
                (None, None) => None,
                _ => {
                    return Err(Error::Config(
                        "--independence and --timing must be given together".into(),
                    ))
                }
            };
            let options = AnalysisOptions {
                alpha,
                confidence: args.confidence.or(cfg.confidence).unwrap_or(0.95),
                reference: None, // taken from the mapping
                replication_class,
            };
            analyze(&input, &mapping, &options)?
        }
    };

    match format {
        OutputFormat::Text => emit(render_text(&report).into_bytes(), &out),
        OutputFormat::Json => emit(render_json(&report)?, &out),
    }
}

fn run_validate(args: ValidateArgs) -> Result<()> {
    let cfg: ValidateConfig = load_config(&args.config)?;
    let input = require(args.input.or(cfg.input), "input")?;
    let mapping = mapping_from(
        args.outcome.or(cfg.outcome),
        args.treatment.or(cfg.treatment),
        args.batch.or(cfg.batch),
        args.exclude.or(cfg.exclude),
        None,
    )?;
    let dataset = parse_csv(&input, &mapping)?;
    let summary = summarize_design(&dataset);
    let report = validate_grbd(&summary);

    match args.format.or(cfg.format).unwrap_or(OutputFormat::Text) {
        OutputFormat::Text => {
            println!("design: t = {}, b = {}, N = {}", summary.t, summary.b, summary.n);
            for check in &report.checks {
                let tag = if !check.passed {
                    "FAIL"
                } else if check.warning {
                    "warn"
                } else {
                    "pass"
                };
                println!("[{tag}] {}: {}", check.name, check.message);
            }
            println!("overall: {}", if report.overall { "pass" } else { "FAIL" });
        }
        OutputFormat::Json => {
            let value = serde_json::json!({ "design": summary, "validation": report });
            println!("{}", serde_json::to_string_pretty(&value).unwrap());
        }
    }
    if !report.overall {
        let reasons: Vec<String> = report.failures().map(|c| c.message.clone()).collect();
        return Err(Error::Config(reasons.join("; ")));
    }
    Ok(())
}

fn run_classify(args: ClassifyArgs) -> Result<()> {
    let cfg: ClassifyConfig = load_config(&args.config)?;
    let independence = require(args.independence.or(cfg.independence), "independence")?;
    let timing = require(args.timing.or(cfg.timing), "timing")?;
    let class = classify_replication(independence.into(), timing.into());
    match args.format.or(cfg.format).unwrap_or(OutputFormat::Text) {
        OutputFormat::Text => println!("panel {} — {}", class.figure_panel, class.label),
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&class).unwrap()),
    }
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let cfg: SimulateConfig = load_config(&args.config)?;
    let t = args.t.or(cfg.t).unwrap_or(2);
    let b = args.b.or(cfg.b).unwrap_or(3);
    let treatment_effects = match args.treatment_effects.or(cfg.treatment_effects) {
        Some(text) => parse_effect_list(&text, t, "--treatment-effects")?,
        None => vec![0.0; t],
    };
    let batch_effects = match args.batch_effects.or(cfg.batch_effects) {
        Some(text) => parse_effect_list(&text, b, "--batch-effects")?,
        None => vec![0.0; b],
    };
    let params = SimParams {
        t,
        b,
        r: args.r.or(cfg.r).unwrap_or(10),
        treatment_effects,
        batch_effects,
        interaction_sd: args.interaction_sd.or(cfg.interaction_sd).unwrap_or(0.0),
        sigma: args.sigma.or(cfg.sigma).unwrap_or(1.0),
        seed: args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
    };

    if let Some(path) = args.emit_data.or(cfg.emit_data) {
        let dataset = generate_grbd(&params)?;
        write_dataset_csv(&path, &dataset)?;
        println!("wrote {} rows to {}", dataset.n_included(), path.display());
        return Ok(());
    }

    let n_sims = args.n_sims.or(cfg.n_sims).unwrap_or(1000);
    let alpha = args.alpha.or(cfg.alpha).unwrap_or(0.05);
    let result = calibration_study(&params, n_sims, alpha)?;
    match args.format.or(cfg.format).unwrap_or(OutputFormat::Text) {
        OutputFormat::Text => {
            println!(
                "calibration: {} sims, alpha = {}, seed = {}, t = {}, b = {}, r = {}",
                result.n_sims, result.alpha, params.seed, params.t, params.b, params.r
            );
            println!(
                "  treatment vs error MS        rejection rate {:.4} (mc se {:.4})",
                result.rejection_rate_eq1, result.monte_carlo_se_eq1
            );
            println!(
                "  treatment vs interaction MS  rejection rate {:.4} (mc se {:.4})",
                result.rejection_rate_eq2, result.monte_carlo_se_eq2
            );
            println!(
                "  interaction vs error MS      rejection rate {:.4} (mc se {:.4})",
                result.rejection_rate_interaction, result.monte_carlo_se_interaction
            );
        }
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&result).unwrap()),
    }
    Ok(())
}

fn write_dataset_csv(path: &Path, dataset: &replicheck::Dataset) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    writer
        .write_record(["outcome", "treatment", "batch"])
        .map_err(|e| Error::Parse(e.to_string()))?;
    for obs in dataset.included() {
        writer
            .write_record([
                format!("{}", obs.outcome()),
                obs.treatment().to_string(),
                obs.batch().to_string(),
            ])
            .map_err(|e| Error::Parse(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

fn run_plot(args: PlotArgs) -> Result<()> {
    let cfg: PlotConfig = load_config(&args.config)?;
    let input = require(args.input.or(cfg.input), "input")?;
    let kind = require(args.kind.or(cfg.kind), "kind")?;
    let out = require(args.out.or(cfg.out), "out")?;
    let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let mapping = mapping_from(
        args.outcome.or(cfg.outcome),
        args.treatment.or(cfg.treatment),
        args.batch.or(cfg.batch),
        args.exclude.or(cfg.exclude),
        None,
    )?;
    let dataset = parse_csv(&input, &mapping)?;
    let svg = match kind {
        PlotKind::Strip => render_strip(&dataset, seed),
        PlotKind::Forest => {
            let confidence = args.confidence.or(cfg.confidence).unwrap_or(0.95);
            let reference = args.reference.or(cfg.reference);
            let effects = per_batch_effects(&dataset, confidence, reference.as_deref())?;
            render_forest(&effects)
        }
    };
    write_svg(&out, &svg)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: CliArgs) -> Result<()> {
    match cli.command {
        Command::Analyze(args) => run_analyze(args),
        Command::Validate(args) => run_validate(args),
        Command::Classify(args) => run_classify(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Plot(args) => run_plot(args),
    }
}

fn main() -> ExitCode {
    let cli = CliArgs::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
