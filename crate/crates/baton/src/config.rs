//! Run configuration read from TOML, and the command-line overrides layered
//! on top of it.

use std::path::{Path, PathBuf};

use baton_core::geometry::default_layout;
use baton_core::matrices::MaskPattern;
use baton_core::metrics::DEFAULT_BUCKET;
use baton_core::predict::PredictorSet;
use baton_core::sim::{ScenarioConfig, TraceKind};
use baton_core::stap::StapConfig;
use baton_core::track::{RegressorHyperparams, TrackerConfig, TrackerKind};
use serde::{Deserialize, Serialize};

use crate::error::{BatonError, Result};

/// Everything one run or sweep needs. Missing tables and keys take their
/// defaults; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub tracker: TrackerConfig,
    pub stap: StapConfig,
    pub evaluation: EvaluationConfig,
    pub training: TrainingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Width of the error-over-time buckets, seconds.
    pub bucket: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { bucket: DEFAULT_BUCKET }
    }
}

/// How the learned tracker gets its weights: loaded from `weights` when set,
/// otherwise trained on `samples` random walks of `duration` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub weights: Option<PathBuf>,
    pub samples: usize,
    pub duration: f64,
    pub hyperparams: RegressorHyperparams,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            weights: None,
            samples: 64,
            duration: 4.0,
            hyperparams: RegressorHyperparams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BatonError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.tracker.validate()?;
        if self.stap.n_f != self.tracker.n_f {
            return Err(BatonError::Argument(format!(
                "stap.n_f ({}) and tracker.n_f ({}) must agree",
                self.stap.n_f, self.tracker.n_f
            )));
        }
        if !(self.evaluation.bucket > 0.0) {
            return Err(BatonError::Argument("evaluation.bucket must be positive".into()));
        }
        Ok(())
    }

    /// Sets the feature rate and rescales the one-second horizons (bootstrap
    /// length and reliability horizon) to match.
    pub fn set_feature_rate(&mut self, rate: f64) -> Result<()> {
        if !(rate > 0.0) {
            return Err(BatonError::Argument(format!("feature rate {rate} must be positive")));
        }
        let per_second = (rate.round() as usize).max(2);
        self.scenario.feature_rate = rate;
        self.tracker.n_f = per_second;
        self.stap.n_f = per_second;
        self.stap.t_w = per_second;
        Ok(())
    }

    pub fn set_links(&mut self, count: usize) -> Result<()> {
        self.scenario.links = default_layout(count)?;
        Ok(())
    }
}

/// Command-line overrides; `None` keeps the config value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub cdc: Option<f64>,
    pub shape: Option<TraceKind>,
    pub links: Option<usize>,
    pub mask: Option<MaskPattern>,
    pub tracker: Option<TrackerKind>,
    pub predictors: Option<PredictorSet>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) -> Result<()> {
        if let Some(seed) = self.seed {
            config.scenario.seed = seed;
        }
        if let Some(cdc) = self.cdc {
            config.scenario.cdc = cdc;
        }
        if let Some(shape) = self.shape {
            config.scenario.trace_kind = shape;
        }
        if let Some(links) = self.links {
            config.set_links(links)?;
        }
        if let Some(mask) = self.mask {
            config.scenario.mask = mask;
        }
        if let Some(kind) = self.tracker {
            config.tracker.kind = kind;
        }
        if let Some(predictors) = self.predictors {
            config.stap.predictors = predictors;
        }
        config.validate()
    }
}

/// `uniform`, `burst:<seconds>` or `outage:<links>`.
pub fn parse_mask(text: &str) -> Result<MaskPattern> {
    let bad = || BatonError::Argument(format!("mask `{text}`: expected uniform, burst:<sec> or outage:<k>"));
    match text.split_once(':') {
        None if text == "uniform" => Ok(MaskPattern::UniformRandom),
        Some(("burst", sec)) => Ok(MaskPattern::Burst {
            seconds: sec.parse().map_err(|_| bad())?,
        }),
        Some(("outage", k)) => Ok(MaskPattern::LinkOutage {
            links: k.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

pub fn format_mask(mask: MaskPattern) -> String {
    match mask {
        MaskPattern::UniformRandom => "uniform".into(),
        MaskPattern::Burst { seconds } => format!("burst:{seconds}"),
        MaskPattern::LinkOutage { links } => format!("outage:{links}"),
    }
}

/// `inverse` or `learned`.
pub fn parse_tracker(text: &str) -> Result<TrackerKind> {
    match text {
        "inverse" => Ok(TrackerKind::ModelInversion),
        "learned" => Ok(TrackerKind::LearnedRegressor),
        _ => Err(BatonError::Argument(format!(
            "tracker `{text}`: expected inverse or learned"
        ))),
    }
}

pub fn parse_predictors(text: &str) -> Result<PredictorSet> {
    PredictorSet::from_name(text).ok_or_else(|| {
        BatonError::Argument(format!(
            "predictors `{text}`: expected one of pred1, pred2, pred3, pred12, pred13, full"
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn default_config_round_trips() {
        let text = RunConfig::default().to_toml().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_tables_keep_other_defaults() {
        let c = RunConfig::from_toml_str(
            "[scenario]\ncdc = 0.3\ntrace_kind = \"n_shape\"\nmask = { burst = { seconds = 2.0 } }\n\
             [stap]\npredictors = \"pred13\"\n",
        )
        .unwrap();
        assert_eq!(c.scenario.cdc, 0.3);
        assert_eq!(c.scenario.trace_kind, TraceKind::NShape);
        assert_eq!(c.scenario.mask, MaskPattern::Burst { seconds: 2.0 });
        assert_eq!(c.stap.predictors, PredictorSet::Pred13);
        assert_eq!(c.tracker, TrackerConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            RunConfig::from_toml_str("[scenario]\ncdcc = 0.2\n"),
            Err(BatonError::ConfigParse(_))
        ));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_toml_str("[scenario]\ncdc = 1.5\n").is_err());
        assert!(RunConfig::from_toml_str("[tracker]\nn_f = 5\n").is_err());
    }

    #[test]
    fn feature_rate_rescales_horizons() {
        let mut c = RunConfig::default();
        c.set_feature_rate(5.0).unwrap();
        assert_eq!((c.tracker.n_f, c.stap.n_f, c.stap.t_w), (5, 5, 5));
        c.validate().unwrap();
    }

    #[test]
    fn mask_syntax() {
        assert_eq!(parse_mask("uniform").unwrap(), MaskPattern::UniformRandom);
        assert_eq!(parse_mask("burst:1.5").unwrap(), MaskPattern::Burst { seconds: 1.5 });
        assert_eq!(parse_mask("outage:2").unwrap(), MaskPattern::LinkOutage { links: 2 });
        assert!(parse_mask("burst").is_err());
        assert!(parse_mask("outage:x").is_err());
        for m in ["uniform", "burst:2", "outage:1"] {
            assert_eq!(format_mask(parse_mask(m).unwrap()), m);
        }
    }

    #[test]
    fn overrides_apply_and_validate() {
        let mut c = RunConfig::default();
        let o = Overrides {
            seed: Some(7),
            cdc: Some(0.2),
            shape: Some(TraceKind::Straight),
            links: Some(3),
            tracker: Some(parse_tracker("inverse").unwrap()),
            predictors: Some(parse_predictors("pred12").unwrap()),
            ..Default::default()
        };
        o.apply(&mut c).unwrap();
        assert_eq!(c.scenario.seed, 7);
        assert_eq!(c.scenario.links.len(), 3);
        assert_eq!(c.stap.predictors, PredictorSet::Pred12);
        let bad = Overrides {
            cdc: Some(0.0),
            ..Default::default()
        };
        assert!(bad.apply(&mut c).is_err());
    }
}
