//! `baton`: run one scenario, a parameter sweep or a predictor ablation and
//! write the results as CSV and JSON.

use std::path::PathBuf;
use std::process::ExitCode;

use baton::config::{parse_mask, parse_predictors, parse_tracker};
use baton::harness::{prepare_model, run, sweep_to_dir, Plan, SweepSpec};
use baton::{BatonError, Overrides, Result, RunConfig};
use baton_core::matrices::MaskPattern;
use baton_core::predict::PredictorSet;
use baton_core::sim::TraceKind;
use baton_core::track::TrackerKind;
use clap::Parser;

/// Simultaneous tracking and PLCR prediction on simulated duty-cycled Wi-Fi
/// links.
///
/// Without `--sweep` and with a single predictor set, runs one scenario and
/// writes its trajectories, matrices, report and manifest. With `--sweep`
/// or several predictor sets, runs every combination `--repeats` times and
/// writes per-run and aggregate tables.
#[derive(Debug, Parser)]
#[command(name = "baton", version)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "baton-out")]
    out: PathBuf,
    /// Root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Communication duty cycle in (0, 1].
    #[arg(long)]
    cdc: Option<f64>,
    /// Trace shape, e.g. straight, turn, circle, n_shape, triple_turn,
    /// eight_shape, square, random_walk.
    #[arg(long, value_parser = parse_shape)]
    shape: Option<TraceKind>,
    /// Number of receivers in the default layout (1 to 4).
    #[arg(long)]
    links: Option<usize>,
    /// uniform, burst:<seconds> or outage:<links>.
    #[arg(long, value_parser = parse_mask_arg)]
    mask: Option<MaskPattern>,
    /// inverse or learned.
    #[arg(long, value_parser = parse_tracker_arg)]
    tracker: Option<TrackerKind>,
    /// One predictor set, or several separated by `|` or `,` for an
    /// ablation: pred1, pred2, pred3, pred12, pred13, full.
    #[arg(long)]
    predictors: Option<String>,
    /// <axis>=<v1,v2,...> with axis cdc, links, shape, feature_rate or
    /// velocity.
    #[arg(long)]
    sweep: Option<String>,
    /// Repeats per sweep cell.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Weights file for the learned tracker; overrides the config.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

fn parse_shape(s: &str) -> std::result::Result<TraceKind, String> {
    s.parse().map_err(|e: baton_core::Error| e.to_string())
}

fn parse_mask_arg(s: &str) -> std::result::Result<MaskPattern, String> {
    parse_mask(s).map_err(|e| e.to_string())
}

fn parse_tracker_arg(s: &str) -> std::result::Result<TrackerKind, String> {
    parse_tracker(s).map_err(|e| e.to_string())
}

fn predictor_sets(text: &str) -> Result<Vec<PredictorSet>> {
    text.split(['|', ','])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_predictors)
        .collect()
}

fn execute(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let sets = match &cli.predictors {
        Some(text) => predictor_sets(text)?,
        None => vec![config.stap.predictors],
    };
    if sets.is_empty() {
        return Err(BatonError::Argument("--predictors lists no set".into()));
    }
    Overrides {
        seed: cli.seed,
        cdc: cli.cdc,
        shape: cli.shape,
        links: cli.links,
        mask: cli.mask,
        tracker: cli.tracker,
        predictors: Some(sets[0]),
    }
    .apply(&mut config)?;
    if let Some(w) = cli.weights {
        config.training.weights = Some(w);
    }
    if cli.print_config {
        print!("{}", config.to_toml()?);
        return Ok(());
    }

    let sweep = cli.sweep.as_deref().map(str::parse::<SweepSpec>).transpose()?;
    if sweep.is_none() && sets.len() == 1 && cli.repeats == 1 {
        let model = prepare_model(&config)?;
        let manifest = run(&config, &cli.out, model.as_ref())?;
        let report = cli.out.join("report.json");
        eprintln!(
            "wrote {} files to {} (report: {})",
            manifest.outputs.len(),
            cli.out.display(),
            report.display()
        );
        return Ok(());
    }
    let plan = Plan {
        sweep,
        predictors: sets,
        repeats: cli.repeats,
    };
    let (result, _) = sweep_to_dir(&config, &plan, &cli.out)?;
    for s in &result.summary {
        let cell = if s.value.is_empty() {
            s.predictors.clone()
        } else {
            format!("{}={} {}", s.axis, s.value, s.predictors)
        };
        println!(
            "{cell}: runs {} median error {:.3} m, PLCR MSE (missing cells) {:.4} (m/s)^2",
            s.runs, s.pooled_median_error, s.pooled_mse_missing
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Messages already carry their cause.
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
