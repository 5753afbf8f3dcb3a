//! Tracking-error and PLCR-reconstruction metrics.

use alloc::string::String;
use alloc::vec::Vec;
// Float math for no_std builds; inherent methods take over when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrices::FeatureMatrix;
use crate::sim::ScenarioOutcome;
use crate::stap::CaseCounts;
use crate::track::Trajectory;

/// Resolution of the error CDF, meters.
pub const CDF_STEP: f64 = 0.05;
/// Default bucket of the error-over-time series, seconds.
pub const DEFAULT_BUCKET: f64 = 0.5;

/// Median of a sample; 0 for an empty one.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorSummary {
    pub median: f64,
    pub mean: f64,
    pub max: f64,
    /// `(threshold, fraction of errors ≤ threshold)` every [`CDF_STEP`]
    /// meters up to the first threshold covering every error.
    pub cdf: Vec<(f64, f64)>,
}

impl ErrorSummary {
    pub fn of(errors: &[f64]) -> Self {
        let max = errors.iter().copied().fold(0.0, f64::max);
        let mut sorted = errors.to_vec();
        sorted.sort_by(f64::total_cmp);
        let steps = (max / CDF_STEP).ceil() as usize;
        let cdf = (0..=steps)
            .map(|i| {
                let th = i as f64 * CDF_STEP;
                let below = sorted.partition_point(|e| *e <= th + 1e-12);
                (
                    th,
                    if sorted.is_empty() {
                        1.0
                    } else {
                        below as f64 / sorted.len() as f64
                    },
                )
            })
            .collect();
        Self {
            median: median(errors),
            mean: mean(errors),
            max,
            cdf,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrackingErrors {
    /// Euclidean error per slot, meters.
    pub errors: Vec<f64>,
    pub summary: ErrorSummary,
}

pub fn tracking_errors(estimate: &Trajectory, truth: &Trajectory) -> Result<TrackingErrors> {
    if estimate.len() != truth.len() {
        return Err(Error::LengthMismatch(estimate.len(), truth.len()));
    }
    if (estimate.slot_duration - truth.slot_duration).abs() > 1e-12 {
        return Err(Error::Precondition("slot durations differ".into()));
    }
    let errors: Vec<f64> = estimate
        .positions
        .iter()
        .zip(&truth.positions)
        .map(|(a, b)| a.distance(*b))
        .collect();
    let summary = ErrorSummary::of(&errors);
    Ok(TrackingErrors { errors, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MseScope {
    /// Cells missing from the raw input.
    MissingCellsOnly,
    All,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MseReport {
    /// (m/s)²; 0 when the scope is empty.
    pub overall: f64,
    /// `None` for links with no cell in scope.
    pub per_link: Vec<Option<f64>>,
    pub cells: usize,
    pub sum_sq: f64,
}

/// Mean squared PLCR error of `filled` against `truth` over the cells in
/// `scope`; `raw` supplies the input mask. Cells missing from `truth` never
/// count.
pub fn plcr_mse(
    filled: &FeatureMatrix,
    truth: &FeatureMatrix,
    raw: &FeatureMatrix,
    scope: MseScope,
) -> Result<MseReport> {
    for m in [truth, raw] {
        if m.slots() != filled.slots() || m.links() != filled.links() {
            return Err(Error::ShapeMismatch(
                filled.slots(),
                filled.links(),
                m.slots(),
                m.links(),
            ));
        }
    }
    let mut sums = alloc::vec![(0.0, 0usize); filled.links()];
    for t in 0..filled.slots() {
        for (n, s) in sums.iter_mut().enumerate() {
            if scope == MseScope::MissingCellsOnly && raw.is_observed(t, n) {
                continue;
            }
            if let (Some(a), Some(b)) = (filled.get(t, n), truth.get(t, n)) {
                s.0 += (a - b) * (a - b);
                s.1 += 1;
            }
        }
    }
    let sum_sq: f64 = sums.iter().map(|s| s.0).sum();
    let cells: usize = sums.iter().map(|s| s.1).sum();
    Ok(MseReport {
        overall: if cells > 0 { sum_sq / cells as f64 } else { 0.0 },
        per_link: sums.iter().map(|&(s, c)| (c > 0).then(|| s / c as f64)).collect(),
        cells,
        sum_sq,
    })
}

/// Relative spread `(max − min) / |mean|` of the ratio `a[t] / b[t]` over
/// every run of `window` consecutive slots in which both magnitudes exceed
/// `floor`. Small values mean the cross-link ratio is stable over that span.
pub fn ratio_spreads(a: &[f64], b: &[f64], window: usize, floor: f64) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if window == 0 {
        return Err(Error::InvalidConfig("ratio window must be at least one slot".into()));
    }
    let mut out = Vec::new();
    for start in 0..(a.len() + 1).saturating_sub(window) {
        let span = start..start + window;
        if !span.clone().all(|t| a[t].abs() > floor && b[t].abs() > floor) {
            continue;
        }
        let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for t in span {
            let q = a[t] / b[t];
            lo = lo.min(q);
            hi = hi.max(q);
            sum += q;
        }
        out.push((hi - lo) / (sum / window as f64).abs());
    }
    Ok(out)
}

/// Means over consecutive non-overlapping buckets of `bucket` seconds; a
/// trailing partial bucket is averaged over what it holds.
pub fn error_over_time(errors: &[f64], slot_duration: f64, bucket: f64) -> Result<Vec<f64>> {
    let per = bucket / slot_duration;
    let k = per.round();
    if !(k >= 1.0) || (per - k).abs() > 1e-9 * per.max(1.0) {
        return Err(Error::InvalidBucket {
            bucket,
            slot: slot_duration,
        });
    }
    Ok(errors.chunks(k as usize).map(mean).collect())
}

/// Early peak against late level of a bucketed error series.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelfCorrection {
    /// Largest bucket mean within the early window.
    pub early_peak: f64,
    /// Mean of the buckets in the final window.
    pub final_mean: f64,
    /// Whether the largest bucket of the whole series lies in the early
    /// window.
    pub global_peak_early: bool,
    /// `final_mean < early_peak`.
    pub corrected: bool,
}

pub fn self_correction(series: &[f64], bucket: f64, early: f64, last: f64) -> SelfCorrection {
    let n_early = ((early / bucket).round() as usize).clamp(1, series.len().max(1));
    let n_last = ((last / bucket).round() as usize).clamp(1, series.len().max(1));
    let early_peak = series.iter().take(n_early).copied().fold(0.0, f64::max);
    let global = series.iter().copied().fold(0.0, f64::max);
    let final_mean = mean(&series[series.len().saturating_sub(n_last)..]);
    SelfCorrection {
        early_peak,
        final_mean,
        global_peak_early: early_peak >= global,
        corrected: final_mean < early_peak,
    }
}

/// Metrics of one scenario run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunReport {
    pub label: String,
    pub tracking: TrackingErrors,
    pub mse_missing: MseReport,
    pub mse_all: MseReport,
    pub bucket: f64,
    pub error_series: Vec<f64>,
    pub self_correction: SelfCorrection,
    pub cases: CaseCounts,
}

pub fn evaluate_run(label: &str, outcome: &ScenarioOutcome, bucket: f64) -> Result<RunReport> {
    let tracking = tracking_errors(&outcome.output.trace, &outcome.truth)?;
    let filled = &outcome.output.filled;
    let mse_missing = plcr_mse(filled, &outcome.features, &outcome.raw, MseScope::MissingCellsOnly)?;
    let mse_all = plcr_mse(filled, &outcome.features, &outcome.raw, MseScope::All)?;
    let error_series = error_over_time(&tracking.errors, outcome.truth.slot_duration, bucket)?;
    let self_correction = self_correction(&error_series, bucket, 3.0, 2.0);
    Ok(RunReport {
        label: label.into(),
        tracking,
        mse_missing,
        mse_all,
        bucket,
        error_series,
        self_correction,
        cases: outcome.output.cases,
    })
}

/// Summary over many runs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub runs: Vec<RunReport>,
    /// Median of all per-slot errors pooled across runs.
    pub pooled_median: f64,
    pub pooled_mean: f64,
    /// Median of the per-run mean errors.
    pub median_of_run_means: f64,
    /// Median of the per-run median errors.
    pub median_of_run_medians: f64,
    /// Missing-cell MSE over all runs' cells together.
    pub pooled_mse_missing: f64,
    pub pooled_mse_all: f64,
    pub cases: CaseCounts,
    /// Share of runs whose late error sits below the early peak.
    pub self_correction_rate: f64,
}

pub fn aggregate(runs: Vec<RunReport>) -> EvalReport {
    let pooled: Vec<f64> = runs.iter().flat_map(|r| r.tracking.errors.iter().copied()).collect();
    let means: Vec<f64> = runs.iter().map(|r| r.tracking.summary.mean).collect();
    let medians: Vec<f64> = runs.iter().map(|r| r.tracking.summary.median).collect();
    let pool_mse = |f: fn(&RunReport) -> &MseReport| {
        let (s, c) = runs
            .iter()
            .fold((0.0, 0usize), |(s, c), r| (s + f(r).sum_sq, c + f(r).cells));
        if c > 0 {
            s / c as f64
        } else {
            0.0
        }
    };
    let mut cases = CaseCounts::default();
    for r in &runs {
        cases.merge(&r.cases);
    }
    let corrected = runs.iter().filter(|r| r.self_correction.corrected).count();
    EvalReport {
        pooled_median: median(&pooled),
        pooled_mean: mean(&pooled),
        median_of_run_means: median(&means),
        median_of_run_medians: median(&medians),
        pooled_mse_missing: pool_mse(|r| &r.mse_missing),
        pooled_mse_all: pool_mse(|r| &r.mse_all),
        cases,
        self_correction_rate: if runs.is_empty() {
            0.0
        } else {
            corrected as f64 / runs.len() as f64
        },
        runs,
    }
}
