//! Simultaneous tracking and predicting: fills a deficient PLCR matrix row
//! by row while extending the trace it is reconstructed from.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{KinematicState, LinkGeometry};
use crate::matrices::{observation_matrix, reliability_matrix, FeatureMatrix, ReliabilityMatrix, DEFAULT_HORIZON};
use crate::predict::{
    combine, model_row, pred2_proportionate, Pred2Guards, PredictionBundle, PredictionCase, PredictorSet,
};
use crate::track::{diff_velocities, Tracker, Trajectory};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct StapConfig {
    /// Bootstrap rows filled from the observation matrix only.
    pub n_f: usize,
    /// Reliability horizon in slots.
    pub t_w: usize,
    pub pred2: Pred2Guards,
    pub predictors: PredictorSet,
    /// Keep a copy of the trace after every iteration.
    pub record_snapshots: bool,
}

/// Speed-ratio guard applied to cross-link predictions inside the loop.
pub const DEFAULT_MAX_SPEED_RATIO: f64 = 1.25;

impl Default for StapConfig {
    fn default() -> Self {
        Self {
            n_f: 10,
            t_w: DEFAULT_HORIZON,
            pred2: Pred2Guards {
                max_speed_ratio: DEFAULT_MAX_SPEED_RATIO,
                ..Pred2Guards::default()
            },
            predictors: PredictorSet::Full,
            record_snapshots: false,
        }
    }
}

/// Loop variables. Rows `0..cursor` of `filled` are final and the trace
/// covers the same slots.
#[derive(Debug, Clone, PartialEq)]
pub struct StapState {
    pub raw: FeatureMatrix,
    pub filled: FeatureMatrix,
    pub p1: FeatureMatrix,
    pub r: ReliabilityMatrix,
    pub trace: Trajectory,
    pub cursor: usize,
}

impl StapState {
    pub fn is_done(&self) -> bool {
        self.cursor >= self.raw.slots()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CaseCounts {
    pub observed: usize,
    pub cross_link: usize,
    pub all_missing: usize,
    /// Cross-link cells where Pred.2 was unavailable.
    pub cross_link_fallback: usize,
}

impl CaseCounts {
    fn add(&mut self, b: &PredictionBundle) {
        match b.case {
            PredictionCase::Observed => self.observed += 1,
            PredictionCase::CrossLink => {
                self.cross_link += 1;
                if b.pred2.is_none() {
                    self.cross_link_fallback += 1;
                }
            }
            PredictionCase::AllMissing => self.all_missing += 1,
        }
    }

    pub fn merge(&mut self, other: &CaseCounts) {
        self.observed += other.observed;
        self.cross_link += other.cross_link;
        self.all_missing += other.all_missing;
        self.cross_link_fallback += other.cross_link_fallback;
    }

    pub fn total(&self) -> usize {
        self.observed + self.cross_link + self.all_missing
    }
}

/// What one loop iteration did.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationDiagnostics {
    pub slot: usize,
    pub bundles: Vec<PredictionBundle>,
    pub values: Vec<f64>,
    /// Trace after the iteration, when snapshots are enabled.
    pub snapshot: Option<Trajectory>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StapOutput {
    pub trace: Trajectory,
    pub filled: FeatureMatrix,
    pub diagnostics: Vec<IterationDiagnostics>,
    pub cases: CaseCounts,
}

/// Builds the observation and reliability matrices, bootstraps the trace
/// and finalizes the first `n_f` rows.
///
/// Bootstrap cells without any earlier observation get the model PLCR of
/// the bootstrap trace.
pub fn stap_init(
    raw: &FeatureMatrix,
    links: &[LinkGeometry],
    tracker: &mut dyn Tracker,
    config: &StapConfig,
) -> Result<StapState> {
    if config.n_f < 2 {
        return Err(Error::InvalidConfig("n_f must be at least 2".into()));
    }
    if raw.slots() <= config.n_f {
        return Err(Error::ScenarioTooShort {
            slots: raw.slots(),
            bootstrap: config.n_f,
        });
    }
    if raw.links() != links.len() {
        return Err(Error::LengthMismatch(raw.links(), links.len()));
    }
    if links.len() < 2 {
        return Err(Error::InsufficientLinks(links.len()));
    }
    let p1 = observation_matrix(raw);
    let r = reliability_matrix(raw, config.t_w)?;
    let trace = tracker.bootstrap(&p1.prefix(config.n_f), links)?;
    if trace.len() != config.n_f {
        return Err(Error::InvalidConfig(alloc::format!(
            "tracker bootstrapped {} slots, expected {}",
            trace.len(),
            config.n_f
        )));
    }
    let velocities = diff_velocities(&trace)?;
    let mut filled = FeatureMatrix::missing(raw.slots(), raw.links(), raw.slot_duration());
    for t in 0..config.n_f {
        for (n, link) in links.iter().enumerate() {
            let value = match p1.get(t, n) {
                Some(v) => v,
                None => link.forward_plcr(&KinematicState::new(trace.positions[t], velocities[t]))?,
            };
            filled.set(t, n, value);
        }
    }
    Ok(StapState {
        raw: raw.clone(),
        filled,
        p1,
        r,
        trace,
        cursor: config.n_f,
    })
}

/// Fills row `cursor` and extends the trace by one slot.
pub fn stap_step(
    mut state: StapState,
    links: &[LinkGeometry],
    tracker: &mut dyn Tracker,
    config: &StapConfig,
) -> Result<(StapState, IterationDiagnostics)> {
    let i = state.cursor;
    if state.is_done() {
        return Err(Error::Precondition(alloc::format!("cursor {i} past the last row")));
    }
    // Model PLCRs at slot i − 1 double as Pred.3 for slot i.
    let model = model_row(&state.trace, links)?;
    let mut bundles = Vec::with_capacity(links.len());
    let mut values = Vec::with_capacity(links.len());
    for (n, &pred3) in model.iter().enumerate() {
        let case = PredictionCase::classify(&state.raw, i, n);
        let pred2 = match case {
            PredictionCase::CrossLink => {
                pred2_proportionate(&state.raw, &state.filled, i, n, Some(&model), config.pred2)
            }
            _ => None,
        };
        let bundle = PredictionBundle {
            pred1: state.p1.get(i, n),
            pred2,
            pred3,
            weight: state.r.weight(i, n),
            case,
        };
        values.push(combine(&bundle, config.predictors));
        bundles.push(bundle);
    }
    for (n, &v) in values.iter().enumerate() {
        state.filled.set(i, n, v);
    }
    state.trace = tracker.predict_trace(&state.filled, &state.raw, i, links, &state.trace)?;
    state.cursor = i + 1;
    let snapshot = config.record_snapshots.then(|| state.trace.clone());
    Ok((
        state,
        IterationDiagnostics {
            slot: i,
            bundles,
            values,
            snapshot,
        },
    ))
}

/// Runs the loop over the whole matrix.
pub fn stap_run(
    raw: &FeatureMatrix,
    links: &[LinkGeometry],
    tracker: &mut dyn Tracker,
    config: &StapConfig,
) -> Result<StapOutput> {
    let mut state = stap_init(raw, links, tracker, config)?;
    let mut diagnostics = Vec::with_capacity(raw.slots() - config.n_f);
    let mut cases = CaseCounts::default();
    for t in 0..config.n_f {
        for n in 0..raw.links() {
            // Bootstrap cells are tallied by their mask only.
            match PredictionCase::classify(raw, t, n) {
                PredictionCase::Observed => cases.observed += 1,
                PredictionCase::CrossLink => cases.cross_link += 1,
                PredictionCase::AllMissing => cases.all_missing += 1,
            }
        }
    }
    while !state.is_done() {
        let (next, diag) = stap_step(state, links, tracker, config)?;
        for b in &diag.bundles {
            cases.add(b);
        }
        diagnostics.push(diag);
        state = next;
    }
    Ok(StapOutput {
        trace: state.trace,
        filled: state.filled,
        diagnostics,
        cases,
    })
}
