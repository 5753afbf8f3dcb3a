//! Scenario execution: single runs with their artifacts, parameter sweeps
//! and predictor ablations.
//!
//! Seeds: a single run uses the configured seed as its root. Repeat `r` of
//! a sweep runs with root `derive_seed(seed, REPEAT_STREAM_BASE + r)`,
//! independent of the axis value, so every value sees the same
//! trajectories, noise and masks. Within a run the root is split into the
//! trajectory, noise, mask and CSI streams by the simulator.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use baton_core::metrics::{aggregate, evaluate_run, EvalReport, RunReport};
use baton_core::predict::PredictorSet;
use baton_core::sim::{
    derive_seed, generate_trajectory, run_scenario, synthesize_features, ScenarioConfig, ScenarioOutcome, TraceKind,
    STREAM_MASK, STREAM_NOISE, STREAM_TRAJECTORY,
};
use baton_core::track::{train_regressor, LearnedRegressor, TrackerKind, TrainingSample};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{BatonError, Result};
use crate::formats::{read_weights, write_feature_matrix, write_trajectory, write_weights, FORMAT_VERSION};
use crate::report::{write_report_json, write_rows, write_slot_csv, SummaryRow, SweepRow};

/// First stream index used for sweep repeats.
pub const REPEAT_STREAM_BASE: u64 = 1 << 32;
/// Stream of the training-set seeds.
pub const TRAINING_STREAM: u64 = 5;

/// Root seed of repeat `repeat` under `root`.
pub fn repeat_seed(root: u64, repeat: usize) -> u64 {
    derive_seed(root, REPEAT_STREAM_BASE + repeat as u64)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| BatonError::io(path, e))
}

/// Trained or loaded regressor when the config asks for the learned
/// tracker, `None` otherwise.
pub fn prepare_model(config: &RunConfig) -> Result<Option<LearnedRegressor>> {
    if config.tracker.kind != TrackerKind::LearnedRegressor {
        return Ok(None);
    }
    if let Some(path) = &config.training.weights {
        let f = File::open(path).map_err(|e| BatonError::io(path, e))?;
        let model = read_weights(std::io::BufReader::new(f))?;
        if model.links != config.scenario.links.len() {
            return Err(BatonError::Argument(format!(
                "weights expect {} links, scenario has {}",
                model.links,
                config.scenario.links.len()
            )));
        }
        return Ok(Some(model));
    }
    train_model(config).map(Some)
}

/// Trains on random walks drawn from the scenario's area and walk
/// parameters, with seeds derived from the scenario seed.
pub fn train_model(config: &RunConfig) -> Result<LearnedRegressor> {
    let base = derive_seed(config.scenario.seed, TRAINING_STREAM);
    let walk = ScenarioConfig {
        trace_kind: TraceKind::RandomWalk,
        duration: config.training.duration,
        speed: None,
        ..config.scenario.clone()
    };
    let dataset = (0..config.training.samples)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(base, i as u64);
            let trajectory = generate_trajectory(&walk, derive_seed(seed, STREAM_TRAJECTORY))?;
            let features = synthesize_features(
                &trajectory,
                &walk.links,
                walk.noise_std,
                walk.mode,
                (&walk.csi_noise, &walk.radio),
                derive_seed(seed, STREAM_NOISE),
            )?;
            Ok(TrainingSample { features, trajectory })
        })
        .collect::<Result<Vec<_>>>()?;
    let hp = baton_core::track::RegressorHyperparams {
        v_max: config.scenario.v_max,
        ..config.training.hyperparams.clone()
    };
    Ok(train_regressor(&dataset, &hp)?.0)
}

/// Simulates, masks, runs the loop and scores one scenario.
pub fn run_once(
    config: &RunConfig,
    label: &str,
    model: Option<&LearnedRegressor>,
) -> Result<(ScenarioOutcome, RunReport)> {
    config.validate()?;
    let outcome = run_scenario(&config.scenario, &config.tracker, &config.stap, model)?;
    let report = evaluate_run(label, &outcome, config.evaluation.bucket)?;
    Ok((outcome, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub root: u64,
    pub trajectory: u64,
    pub noise: u64,
    pub mask: u64,
}

impl Seeds {
    pub fn from_root(root: u64) -> Self {
        Self {
            root,
            trajectory: derive_seed(root, STREAM_TRAJECTORY),
            noise: derive_seed(root, STREAM_NOISE),
            mask: derive_seed(root, STREAM_MASK),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub baton: String,
    pub baton_core: String,
    pub formats: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            baton: env!("CARGO_PKG_VERSION").into(),
            baton_core: baton_core::VERSION.into(),
            formats: FORMAT_VERSION,
        }
    }
}

/// What a run or sweep produced and how long it took.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub seeds: Vec<Seeds>,
    pub versions: Versions,
    /// Output files, relative to the output directory.
    pub outputs: Vec<PathBuf>,
    /// Wall-clock seconds per stage.
    pub timings: Vec<(String, f64)>,
}

impl RunManifest {
    fn new(config: &RunConfig) -> Self {
        Self {
            config: config.clone(),
            seeds: Vec::new(),
            versions: Versions::default(),
            outputs: Vec::new(),
            timings: Vec::new(),
        }
    }

    fn finish(mut self, out_dir: &Path) -> Result<Self> {
        self.outputs.push("manifest.json".into());
        let path = out_dir.join("manifest.json");
        let mut f = create(&path)?;
        serde_json::to_writer_pretty(&mut f, &self)?;
        std::io::Write::write_all(&mut f, b"\n").map_err(|e| BatonError::io(&path, e))?;
        std::io::Write::flush(&mut f).map_err(|e| BatonError::io(&path, e))?;
        Ok(self)
    }
}

fn write_file(
    out_dir: &Path,
    name: &str,
    manifest: &mut RunManifest,
    write: impl FnOnce(BufWriter<File>) -> Result<()>,
) -> Result<()> {
    let path = out_dir.join(name);
    write(create(&path)?)?;
    manifest.outputs.push(name.into());
    Ok(())
}

fn ensure_dir(out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| BatonError::io(out_dir, e))
}

/// Single scenario with every artifact: config snapshot, trajectories,
/// matrices, the report as JSON and tidy CSV, and the manifest.
pub fn run(config: &RunConfig, out_dir: &Path, model: Option<&LearnedRegressor>) -> Result<RunManifest> {
    ensure_dir(out_dir)?;
    let mut manifest = RunManifest::new(config);
    manifest.seeds.push(Seeds::from_root(config.scenario.seed));
    let start = Instant::now();
    let (outcome, report) = run_once(config, "run", model)?;
    manifest
        .timings
        .push(("scenario".into(), start.elapsed().as_secs_f64()));
    let eval = aggregate(vec![report.clone()]);

    let links = &config.scenario.links;
    let text = config.to_toml()?;
    write_file(out_dir, "config.toml", &mut manifest, |mut w| {
        std::io::Write::write_all(&mut w, text.as_bytes()).map_err(|e| BatonError::io("config.toml", e))
    })?;
    write_file(out_dir, "truth.csv", &mut manifest, |w| {
        write_trajectory(w, &outcome.truth)
    })?;
    write_file(out_dir, "estimate.csv", &mut manifest, |w| {
        write_trajectory(w, &outcome.output.trace)
    })?;
    write_file(out_dir, "features.csv", &mut manifest, |w| {
        write_feature_matrix(w, &outcome.features, links)
    })?;
    write_file(out_dir, "raw.csv", &mut manifest, |w| {
        write_feature_matrix(w, &outcome.raw, links)
    })?;
    write_file(out_dir, "filled.csv", &mut manifest, |w| {
        write_feature_matrix(w, &outcome.output.filled, links)
    })?;
    write_file(out_dir, "report.json", &mut manifest, |w| write_report_json(w, &eval))?;
    write_file(out_dir, "slots.csv", &mut manifest, |w| {
        write_slot_csv(w, &[(&outcome, &report)])
    })?;
    if let Some(model) = model {
        write_file(out_dir, "weights.bin", &mut manifest, |w| write_weights(w, model))?;
    }
    manifest.timings.push(("total".into(), start.elapsed().as_secs_f64()));
    manifest.finish(out_dir)
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Cdc,
    Links,
    Shape,
    FeatureRate,
    Velocity,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 5] = [
        SweepAxis::Cdc,
        SweepAxis::Links,
        SweepAxis::Shape,
        SweepAxis::FeatureRate,
        SweepAxis::Velocity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Cdc => "cdc",
            SweepAxis::Links => "links",
            SweepAxis::Shape => "shape",
            SweepAxis::FeatureRate => "feature_rate",
            SweepAxis::Velocity => "velocity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    /// `config` with this axis set to `value`.
    pub fn apply(self, config: &RunConfig, value: &str) -> Result<RunConfig> {
        let mut c = config.clone();
        let number = || {
            value
                .parse::<f64>()
                .map_err(|_| BatonError::Argument(format!("{}: `{value}` is not a number", self.name())))
        };
        match self {
            SweepAxis::Cdc => c.scenario.cdc = number()?,
            SweepAxis::Links => {
                let k = value
                    .parse::<usize>()
                    .map_err(|_| BatonError::Argument(format!("links: `{value}` is not a count")))?;
                c.set_links(k)?;
            }
            SweepAxis::Shape => c.scenario.trace_kind = value.parse()?,
            SweepAxis::FeatureRate => c.set_feature_rate(number()?)?,
            SweepAxis::Velocity => c.scenario.speed = Some(number()?),
        }
        c.validate()?;
        Ok(c)
    }
}

/// `<axis>=<v1,v2,...>`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<String>,
}

impl std::str::FromStr for SweepSpec {
    type Err = BatonError;

    fn from_str(s: &str) -> Result<Self> {
        let (axis, values) = s
            .split_once('=')
            .ok_or_else(|| BatonError::Argument(format!("sweep `{s}`: expected <axis>=<v1,v2,...>")))?;
        let axis = SweepAxis::from_name(axis.trim()).ok_or_else(|| {
            BatonError::Argument(format!(
                "sweep axis `{axis}`: expected one of cdc, links, shape, feature_rate, velocity"
            ))
        })?;
        let values: Vec<String> = values
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(BatonError::Argument(format!("sweep `{s}` lists no values")));
        }
        Ok(Self { axis, values })
    }
}

/// Scenarios run by a sweep: every predictor set × axis value × repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub sweep: Option<SweepSpec>,
    pub predictors: Vec<PredictorSet>,
    pub repeats: usize,
}

/// Per-run rows plus the per-cell aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
    pub reports: Vec<EvalReport>,
}

/// Runs a plan on a worker pool. Output order follows the plan, so results
/// do not depend on scheduling.
pub fn sweep(config: &RunConfig, plan: &Plan) -> Result<SweepResult> {
    if plan.repeats == 0 {
        return Err(BatonError::Argument("repeats must be at least 1".into()));
    }
    if plan.predictors.is_empty() {
        return Err(BatonError::Argument("no predictor set selected".into()));
    }
    let (axis_name, values) = match &plan.sweep {
        Some(s) => (s.axis.name().to_string(), s.values.clone()),
        None => ("none".to_string(), vec![String::new()]),
    };
    // Configs and models per axis value, built up front.
    let mut cells = Vec::new();
    for value in &values {
        let base = match &plan.sweep {
            Some(s) => s.axis.apply(config, value)?,
            None => config.clone(),
        };
        let model = prepare_model(&base)?;
        for &set in &plan.predictors {
            let mut c = base.clone();
            c.stap.predictors = set;
            cells.push((value.clone(), set, c, model.clone()));
        }
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|i| (0..plan.repeats).map(move |r| (i, r)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(i, r)| {
            let (value, set, c, model) = &cells[i];
            let mut c = c.clone();
            c.scenario.seed = repeat_seed(config.scenario.seed, r);
            let label = format!("{axis_name}={value}/{}/{r}", set.name());
            let (_, report) = run_once(&c, &label, model.as_ref())?;
            Ok((i, r, c.scenario.seed, report))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(results.len());
    let mut grouped: Vec<Vec<RunReport>> = vec![Vec::new(); cells.len()];
    for (i, r, seed, report) in results {
        let (value, set, _, _) = &cells[i];
        rows.push(SweepRow {
            axis: axis_name.clone(),
            value: value.clone(),
            predictors: set.name().into(),
            repeat: r,
            seed,
            median_error: report.tracking.summary.median,
            mean_error: report.tracking.summary.mean,
            mse_missing: report.mse_missing.overall,
            mse_all: report.mse_all.overall,
            self_corrected: report.self_correction.corrected,
        });
        grouped[i].push(report);
    }
    let mut summary = Vec::with_capacity(cells.len());
    let mut reports = Vec::with_capacity(cells.len());
    for ((value, set, _, _), runs) in cells.iter().zip(grouped) {
        let eval = aggregate(runs);
        summary.push(SummaryRow {
            axis: axis_name.clone(),
            value: value.clone(),
            predictors: set.name().into(),
            runs: eval.runs.len(),
            pooled_median_error: eval.pooled_median,
            median_of_run_means: eval.median_of_run_means,
            pooled_mse_missing: eval.pooled_mse_missing,
            pooled_mse_all: eval.pooled_mse_all,
            self_correction_rate: eval.self_correction_rate,
        });
        reports.push(eval);
    }
    Ok(SweepResult { rows, summary, reports })
}

/// Runs a plan and writes `sweep.csv`, `summary.csv`, the config snapshot
/// and the manifest into `out_dir`.
pub fn sweep_to_dir(config: &RunConfig, plan: &Plan, out_dir: &Path) -> Result<(SweepResult, RunManifest)> {
    ensure_dir(out_dir)?;
    let mut manifest = RunManifest::new(config);
    manifest.seeds = (0..plan.repeats)
        .map(|r| Seeds::from_root(repeat_seed(config.scenario.seed, r)))
        .collect();
    let start = Instant::now();
    let result = sweep(config, plan)?;
    manifest.timings.push(("sweep".into(), start.elapsed().as_secs_f64()));
    let text = config.to_toml()?;
    write_file(out_dir, "config.toml", &mut manifest, |mut w| {
        std::io::Write::write_all(&mut w, text.as_bytes()).map_err(|e| BatonError::io("config.toml", e))
    })?;
    write_file(out_dir, "sweep.csv", &mut manifest, |w| write_rows(w, &result.rows))?;
    write_file(out_dir, "summary.csv", &mut manifest, |w| {
        write_rows(w, &result.summary)
    })?;
    let manifest = manifest.finish(out_dir)?;
    Ok((result, manifest))
}

/// Scenarios of `config` over `shapes` × `repeats`, run in parallel and
/// aggregated in plan order.
pub fn suite(config: &RunConfig, shapes: &[TraceKind], repeats: usize) -> Result<EvalReport> {
    let jobs: Vec<(TraceKind, usize)> = shapes.iter().flat_map(|&s| (0..repeats).map(move |r| (s, r))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(shape, r)| {
            let mut c = config.clone();
            c.scenario.trace_kind = shape;
            c.scenario.seed = repeat_seed(config.scenario.seed, r);
            run_once(&c, &format!("{shape}/{r}"), None).map(|(_, report)| report)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(runs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_spec_parses() {
        let s: SweepSpec = "cdc=1.0, 0.4,0.2".parse().unwrap();
        assert_eq!(s.axis, SweepAxis::Cdc);
        assert_eq!(s.values, ["1.0", "0.4", "0.2"]);
        assert!("cdc".parse::<SweepSpec>().is_err());
        assert!("speed=1".parse::<SweepSpec>().is_err());
        assert!("links=".parse::<SweepSpec>().is_err());
    }

    #[test]
    fn axes_edit_the_config() {
        let c = RunConfig::default();
        assert_eq!(SweepAxis::Cdc.apply(&c, "0.3").unwrap().scenario.cdc, 0.3);
        assert_eq!(SweepAxis::Links.apply(&c, "2").unwrap().scenario.links.len(), 2);
        assert_eq!(
            SweepAxis::Shape.apply(&c, "eight_shape").unwrap().scenario.trace_kind,
            TraceKind::EightShape
        );
        let fr = SweepAxis::FeatureRate.apply(&c, "5").unwrap();
        assert_eq!((fr.scenario.feature_rate, fr.stap.n_f, fr.stap.t_w), (5.0, 5, 5));
        assert_eq!(SweepAxis::Velocity.apply(&c, "1.2").unwrap().scenario.speed, Some(1.2));
        assert!(SweepAxis::Cdc.apply(&c, "x").is_err());
        assert!(SweepAxis::Velocity.apply(&c, "3.0").is_err());
    }

    #[test]
    fn repeat_seeds_are_distinct() {
        let s: Vec<u64> = (0..100).map(|r| repeat_seed(7, r)).collect();
        let mut d = s.clone();
        d.sort();
        d.dedup();
        assert_eq!(d.len(), s.len());
    }
}
