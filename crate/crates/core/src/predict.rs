//! PLCR predictors for missing cells and their weighted integration.
//!
//! * Pred.1 carries the last observation of the same link forward.
//! * Pred.2 scales the current observation of another link by the ratio of
//!   the two links' PLCRs one slot earlier.
//! * Pred.3 evaluates the forward model on the latest trace position and
//!   velocity.

use alloc::vec::Vec;

use crate::error::Result;
use crate::geometry::{KinematicState, LinkGeometry};
use crate::matrices::FeatureMatrix;
use crate::track::Trajectory;

/// Smallest reference-link denominator accepted by Pred.2, m/s.
pub const DEFAULT_EPS_DEN: f64 = 0.05;

/// Which rule fills a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PredictionCase {
    /// The cell itself was observed.
    Observed,
    /// Missing, but another link was observed in the same slot.
    CrossLink,
    /// Every link is missing in this slot.
    AllMissing,
}

impl PredictionCase {
    /// Case of cell `(t, n)` given the raw mask.
    pub fn classify(raw: &FeatureMatrix, t: usize, n: usize) -> Self {
        if raw.is_observed(t, n) {
            PredictionCase::Observed
        } else if raw.row_has_observation(t) {
            PredictionCase::CrossLink
        } else {
            PredictionCase::AllMissing
        }
    }
}

/// Everything known about one cell before integration.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictionBundle {
    /// `None` before the link's first observation.
    pub pred1: Option<f64>,
    pub pred2: Option<f64>,
    pub pred3: f64,
    /// Reliability weight of `pred1`.
    pub weight: f64,
    pub case: PredictionCase,
}

impl PredictionBundle {
    /// Weight actually given to `pred1`: zero when there is none.
    fn effective_weight(&self) -> f64 {
        if self.pred1.is_some() {
            self.weight.clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    fn blend(&self, partner: f64) -> f64 {
        let w = self.effective_weight();
        let p1 = self.pred1.unwrap_or(partner);
        w * p1 + (1.0 - w) * partner
    }
}

/// Predictor subsets used for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PredictorSet {
    /// Pred.1 only; Pred.3 before the first observation.
    Pred1,
    /// Pred.2 where available, else Pred.1, else Pred.3.
    Pred2,
    /// Pred.3 only.
    Pred3,
    /// Pred.1 blended with Pred.2 where available, else Pred.1.
    Pred12,
    /// Pred.1 blended with Pred.3.
    Pred13,
    /// The three-case rule of [`integrate`].
    #[default]
    Full,
}

impl PredictorSet {
    pub const ALL: [PredictorSet; 6] = [
        PredictorSet::Pred1,
        PredictorSet::Pred2,
        PredictorSet::Pred3,
        PredictorSet::Pred12,
        PredictorSet::Pred13,
        PredictorSet::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PredictorSet::Pred1 => "pred1",
            PredictorSet::Pred2 => "pred2",
            PredictorSet::Pred3 => "pred3",
            PredictorSet::Pred12 => "pred12",
            PredictorSet::Pred13 => "pred13",
            PredictorSet::Full => "full",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(name))
    }
}

/// Rejection thresholds for the cross-link prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Pred2Guards {
    /// Minimum |denominator| in m/s.
    pub eps_den: f64,
    /// Largest accepted ratio between the reference link's value at `t2`
    /// and at `t2 − 1`, in either direction. Infinite disables the check.
    pub max_speed_ratio: f64,
}

impl Default for Pred2Guards {
    fn default() -> Self {
        Self {
            eps_den: DEFAULT_EPS_DEN,
            max_speed_ratio: f64::INFINITY,
        }
    }
}

/// Cross-link proportionate prediction for cell `(t2, n1)`.
///
/// `raw` supplies the observed cells of row `t2`; `populated` supplies row
/// `t2 − 1` when `model_at_t1` (per-link model PLCRs at `t2 − 1`) is absent.
/// Among observed reference links whose denominator clears `eps_den`, keeps
/// its sign between the two slots and changes by at most `max_speed_ratio`,
/// the one with the largest denominator is used.
pub fn pred2_proportionate(
    raw: &FeatureMatrix,
    populated: &FeatureMatrix,
    t2: usize,
    n1: usize,
    model_at_t1: Option<&[f64]>,
    guards: Pred2Guards,
) -> Option<f64> {
    if t2 == 0 || t2 >= raw.slots() {
        return None;
    }
    let t1 = t2 - 1;
    let at_t1 = |n: usize| -> Option<f64> {
        match model_at_t1 {
            Some(m) => m.get(n).copied(),
            None => populated.get(t1, n),
        }
    };
    let numerator = at_t1(n1)?;
    let mut best: Option<(f64, f64)> = None;
    for n2 in (0..raw.links()).filter(|&n| n != n1) {
        let (Some(now), Some(den)) = (raw.get(t2, n2), at_t1(n2)) else {
            continue;
        };
        if den.abs() < guards.eps_den || now.signum() != den.signum() {
            continue;
        }
        let ratio = now / den;
        if ratio > guards.max_speed_ratio || ratio * guards.max_speed_ratio < 1.0 {
            continue;
        }
        if best.map_or(true, |(_, d)| den.abs() > d.abs()) {
            best = Some((now, den));
        }
    }
    best.map(|(now, den)| now * numerator / den)
}

/// Model-based PLCR of `link` at the last slot of `trace`, reused as the
/// prediction for the following slot.
pub fn pred3_model_based(trace: &Trajectory, link: &LinkGeometry) -> Result<f64> {
    let state = last_state(trace)?;
    link.forward_plcr(&state)
}

/// Model-based PLCRs of every link at the last slot of `trace`.
pub fn model_row(trace: &Trajectory, links: &[LinkGeometry]) -> Result<Vec<f64>> {
    let state = last_state(trace)?;
    links.iter().map(|l| l.forward_plcr(&state)).collect()
}

fn last_state(trace: &Trajectory) -> Result<KinematicState> {
    let n = trace.len();
    if n < 2 {
        return Err(crate::error::Error::TooShort(n));
    }
    let p = &trace.positions;
    let velocity = (p[n - 1] - p[n - 2]) / trace.slot_duration;
    Ok(KinematicState::new(p[n - 1], velocity))
}

/// Three-case integration: observed cells keep Pred.1; cross-link cells
/// blend Pred.1 with Pred.2; all-missing cells blend Pred.1 with Pred.3.
/// A cross-link cell without Pred.2 falls back to the Pred.3 blend.
pub fn integrate(bundle: &PredictionBundle) -> f64 {
    combine(bundle, PredictorSet::Full)
}

/// Final cell value under a predictor subset.
pub fn combine(bundle: &PredictionBundle, set: PredictorSet) -> f64 {
    if bundle.case == PredictionCase::Observed {
        if let Some(p1) = bundle.pred1 {
            return p1;
        }
    }
    let b = bundle;
    match set {
        PredictorSet::Pred1 => b.pred1.unwrap_or(b.pred3),
        PredictorSet::Pred2 => b.pred2.or(b.pred1).unwrap_or(b.pred3),
        PredictorSet::Pred3 => b.pred3,
        PredictorSet::Pred12 => match (b.pred1, b.pred2) {
            (_, Some(p2)) => b.blend(p2),
            (Some(p1), None) => p1,
            (None, None) => b.pred3,
        },
        PredictorSet::Pred13 => b.blend(b.pred3),
        PredictorSet::Full => match (b.case, b.pred2) {
            (PredictionCase::CrossLink, Some(p2)) => b.blend(p2),
            _ => b.blend(b.pred3),
        },
    }
}
