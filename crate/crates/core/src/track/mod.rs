//! Trace estimation from a (partially reconstructed) PLCR matrix.
//!
//! Two trackers sit behind [`Tracker`]: [`ModelInversion`] inverts the
//! forward model by least squares and dead-reckons from a known start, and
//! [`LearnedTracker`] rolls out a small trained regressor.

mod inversion;
mod learned;
mod solve;
mod trajectory;

use alloc::boxed::Box;
use alloc::vec::Vec;

pub use learned::{
    train_regressor, LearnedRegressor, LearnedTracker, RegressorHyperparams, TrainingReport, TrainingSample,
};
pub use solve::{solve_step, solve_velocity, MAX_CONDITION};
pub use trajectory::{diff_velocities, Trajectory, DEFAULT_STEP_EPS};

use crate::error::{Error, Result};
use crate::geometry::{LinkGeometry, Point2, Vec2, DEFAULT_V_MAX};
use crate::matrices::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TrackerKind {
    ModelInversion,
    LearnedRegressor,
}

/// Where the trace starts.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InitialPosition {
    Known(Point2),
    /// Rectangle searched on a grid of `resolution` meters for the start that
    /// best explains the bootstrap rows.
    Region {
        min: Point2,
        max: Point2,
        resolution: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrackerConfig {
    pub kind: TrackerKind,
    pub initial: InitialPosition,
    /// Tikhonov weight on `|v|²`.
    pub regularization: f64,
    /// Bootstrap horizon in slots.
    pub n_f: usize,
    pub v_max: f64,
    /// Trailing slots re-solved on every call, besides the new one.
    pub refine_window: usize,
    /// Least-squares weight of reconstructed (not observed) cells.
    pub filled_weight: f64,
    /// Weight on slot-to-slot velocity change, per (m/s)².
    pub smoothness: f64,
    /// Weight on the window offset, per m².
    pub shift_prior: f64,
    /// Largest offset applied to the refinement window per call, meters.
    pub max_shift: f64,
    pub lm_iterations: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            kind: TrackerKind::ModelInversion,
            initial: InitialPosition::Known(Point2::ZERO),
            regularization: 1e-3,
            n_f: 10,
            v_max: DEFAULT_V_MAX,
            refine_window: 10,
            filled_weight: 0.2,
            smoothness: 0.1,
            shift_prior: 4.0,
            max_shift: DEFAULT_STEP_EPS,
            lm_iterations: 6,
        }
    }
}

impl TrackerConfig {
    pub fn with_start(mut self, start: Point2) -> Self {
        self.initial = InitialPosition::Known(start);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.n_f < 2 {
            return bad("n_f must be at least 2");
        }
        if !(self.regularization >= 0.0) {
            return bad("regularization must be non-negative");
        }
        if !(self.v_max > 0.0) {
            return bad("v_max must be positive");
        }
        if !(self.filled_weight >= 0.0 && self.smoothness >= 0.0 && self.shift_prior >= 0.0) {
            return bad("least-squares weights must be non-negative");
        }
        if !(self.max_shift >= 0.0) {
            return bad("max_shift must be non-negative");
        }
        if let InitialPosition::Region { min, max, resolution } = self.initial {
            if !(resolution > 0.0) || min.x > max.x || min.y > max.y {
                return bad("initial region must be a non-empty rectangle with positive resolution");
            }
        }
        Ok(())
    }
}

/// Maps a PLCR matrix prefix to a trace prefix.
pub trait Tracker {
    /// Trace over the rows of the observation-matrix prefix.
    fn bootstrap(&mut self, p1_prefix: &FeatureMatrix, links: &[LinkGeometry]) -> Result<Trajectory>;

    /// Trace over rows `0..=upto` of `filled`, given the trace over rows
    /// `0..upto` from the previous call. `raw` tells observed cells apart
    /// from reconstructed ones. Rows after `upto` are never read.
    fn predict_trace(
        &mut self,
        filled: &FeatureMatrix,
        raw: &FeatureMatrix,
        upto: usize,
        links: &[LinkGeometry],
        previous: &Trajectory,
    ) -> Result<Trajectory>;
}

/// Least-squares inversion of the forward model with windowed refinement.
#[derive(Debug, Clone)]
pub struct ModelInversion {
    pub config: TrackerConfig,
}

impl ModelInversion {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl Tracker for ModelInversion {
    /// Unlike [`bootstrap_trace`], a prefix with fewer than two informative
    /// links still yields a trace from a known start: under-determined
    /// slots hold the last velocity, starting from rest.
    fn bootstrap(&mut self, p1_prefix: &FeatureMatrix, links: &[LinkGeometry]) -> Result<Trajectory> {
        match (bootstrap_trace(p1_prefix, links, &self.config), self.config.initial) {
            (Err(Error::InsufficientLinks(_)), InitialPosition::Known(start)) => {
                dead_reckon(&p1_prefix.prefix(self.config.n_f), links, &self.config, start).map(|(t, _)| t)
            }
            (result, _) => result,
        }
    }

    fn predict_trace(
        &mut self,
        filled: &FeatureMatrix,
        raw: &FeatureMatrix,
        upto: usize,
        links: &[LinkGeometry],
        previous: &Trajectory,
    ) -> Result<Trajectory> {
        predict_trace(filled, raw, upto, links, &self.config, previous)
    }
}

/// Builds the tracker named by `config.kind`. A learned tracker needs a
/// trained model.
pub fn build_tracker(config: &TrackerConfig, model: Option<LearnedRegressor>) -> Result<Box<dyn Tracker + Send>> {
    match config.kind {
        TrackerKind::ModelInversion => Ok(Box::new(ModelInversion::new(config.clone())?)),
        TrackerKind::LearnedRegressor => {
            let model = model
                .ok_or_else(|| Error::InvalidConfig("learned tracker requested without a trained model".into()))?;
            Ok(Box::new(LearnedTracker::new(model, config.clone())?))
        }
    }
}

fn links_with_observations(p: &FeatureMatrix) -> usize {
    (0..p.links()).filter(|&n| p.observed_in_column(n) > 0).count()
}

/// Dead-reckons through `p1` from `start`; returns the trace and the sum of
/// squared forward-model residuals over available cells.
fn dead_reckon(
    p1: &FeatureMatrix,
    links: &[LinkGeometry],
    cfg: &TrackerConfig,
    start: Point2,
) -> Result<(Trajectory, f64)> {
    let dt = p1.slot_duration();
    let mut positions = Vec::with_capacity(p1.slots());
    let mut velocities = Vec::with_capacity(p1.slots());
    positions.push(start);
    let first = solve_velocity(&p1.row(0), start, links, cfg.regularization, cfg.v_max).unwrap_or(Vec2::ZERO);
    velocities.push(first);
    let mut last = first;
    for t in 1..p1.slots() {
        let from = positions[t - 1];
        let v = solve_step(&p1.row(t), from, links, cfg.regularization, cfg.v_max, dt).unwrap_or(last);
        positions.push(from + v * dt);
        velocities.push(v);
        last = v;
    }
    let mut residual = 0.0;
    for t in 0..p1.slots() {
        for (n, link) in links.iter().enumerate() {
            if let Some(r) = p1.get(t, n) {
                let a = link.fresnel_coefficients(positions[t])?;
                let e = r - a.dot(velocities[t]);
                residual += e * e;
            }
        }
    }
    Ok((Trajectory::new(positions, dt), residual))
}

/// Initial trace over the first `n_f` rows of the observation matrix.
///
/// Only carried-forward observations are used; cells before a column's
/// first observation are skipped.
pub fn bootstrap_trace(
    p1_prefix: &FeatureMatrix,
    links: &[LinkGeometry],
    config: &TrackerConfig,
) -> Result<Trajectory> {
    config.validate()?;
    if p1_prefix.links() != links.len() {
        return Err(Error::LengthMismatch(p1_prefix.links(), links.len()));
    }
    let prefix = p1_prefix.prefix(config.n_f);
    let available = links_with_observations(&prefix);
    if available < 2 {
        return Err(Error::InsufficientLinks(available));
    }
    match config.initial {
        InitialPosition::Known(start) => dead_reckon(&prefix, links, config, start).map(|(t, _)| t),
        InitialPosition::Region { min, max, resolution } => {
            let nx = ((max.x - min.x) / resolution) as usize + 1;
            let ny = ((max.y - min.y) / resolution) as usize + 1;
            let mut best: Option<(Trajectory, f64)> = None;
            for i in 0..nx {
                for j in 0..ny {
                    let start = Point2::new(min.x + i as f64 * resolution, min.y + j as f64 * resolution);
                    let Ok((trace, cost)) = dead_reckon(&prefix, links, config, start) else {
                        continue;
                    };
                    if best.as_ref().map_or(true, |(_, c)| cost < *c) {
                        best = Some((trace, cost));
                    }
                }
            }
            best.map(|(t, _)| t).ok_or(Error::DegenerateGeometry)
        }
    }
}

/// Extends `previous` (rows `0..upto`) by row `upto` and re-solves the
/// trailing `refine_window` slots jointly, letting the window slide by at
/// most `max_shift` to fit observed cells better. Slots before the window
/// are left untouched.
pub fn predict_trace(
    filled: &FeatureMatrix,
    raw: &FeatureMatrix,
    upto: usize,
    links: &[LinkGeometry],
    config: &TrackerConfig,
    previous: &Trajectory,
) -> Result<Trajectory> {
    if previous.len() != upto {
        return Err(Error::Precondition(alloc::format!(
            "previous trace has {} slots, expected {upto}",
            previous.len()
        )));
    }
    if upto == 0 || upto >= filled.slots() {
        return Err(Error::Precondition(alloc::format!(
            "row {upto} outside 1..{}",
            filled.slots()
        )));
    }
    filled.same_shape(raw)?;
    if filled.links() != links.len() {
        return Err(Error::LengthMismatch(filled.links(), links.len()));
    }
    let dt = filled.slot_duration();
    let prev = &previous.positions;
    let start = upto.saturating_sub(config.refine_window).max(1);

    let mut init: Vec<Vec2> = (start..upto).map(|k| (prev[k] - prev[k - 1]) / dt).collect();
    let hold = init.last().copied().unwrap_or_else(|| {
        if upto >= 2 {
            (prev[upto - 1] - prev[upto - 2]) / dt
        } else {
            Vec2::ZERO
        }
    });
    let newest = solve_step(
        &filled.row(upto),
        prev[upto - 1],
        links,
        config.regularization,
        config.v_max,
        dt,
    )
    .unwrap_or(hold);
    init.push(newest);
    for v in &mut init {
        *v = v.clamp_norm(config.v_max);
    }

    let (shift, velocities) = if config.lm_iterations > 0 && init.len() > 0 {
        let rows = (start..=upto)
            .map(|k| {
                (0..links.len())
                    .map(|n| {
                        filled.get(k, n).map(|v| {
                            let w = if raw.is_observed(k, n) {
                                1.0
                            } else {
                                config.filled_weight
                            };
                            (v, w)
                        })
                    })
                    .collect()
            })
            .collect();
        let window = inversion::Window {
            links,
            anchor: prev[start - 1],
            prev_velocity: (start >= 2).then(|| (prev[start - 1] - prev[start - 2]) / dt),
            dt,
            rows,
            smoothness: config.smoothness,
            shift_prior: config.shift_prior,
            regularization: config.regularization,
        };
        window.refine(&init, config.lm_iterations)
    } else {
        (Vec2::ZERO, init)
    };

    let shift = shift.clamp_norm(config.max_shift);
    let mut positions = prev[..start].to_vec();
    let mut p = prev[start - 1] + shift;
    for v in velocities {
        p += v.clamp_norm(config.v_max) * dt;
        positions.push(p);
    }
    Ok(Trajectory::new(positions, dt))
}
