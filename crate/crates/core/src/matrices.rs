//! PLCR matrix with explicit missingness, the carried-forward observation
//! matrix and the reliability weights for carried-forward values.

use alloc::vec;
use alloc::vec::Vec;
// Float math for no_std builds; inherent methods take over when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default feature slot, seconds (10 features per second).
pub const DEFAULT_SLOT_DURATION: f64 = 0.1;

/// Default reliability horizon `T_w`, slots.
pub const DEFAULT_HORIZON: usize = 10;

/// `T × N` PLCR values (m/s), row = time slot, column = link.
///
/// A cell whose mask is `false` is missing; its value is meaningless and is
/// stored as `0.0`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureMatrix {
    slots: usize,
    links: usize,
    slot_duration: f64,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl FeatureMatrix {
    /// All-missing matrix.
    pub fn missing(slots: usize, links: usize, slot_duration: f64) -> Self {
        Self {
            slots,
            links,
            slot_duration,
            values: vec![0.0; slots * links],
            mask: vec![false; slots * links],
        }
    }

    /// Fully observed matrix from row-major values.
    pub fn complete(slots: usize, links: usize, slot_duration: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != slots * links {
            return Err(Error::LengthMismatch(values.len(), slots * links));
        }
        Ok(Self {
            slots,
            links,
            slot_duration,
            values,
            mask: vec![true; slots * links],
        })
    }

    /// Matrix from row-major optional cells.
    pub fn from_cells(slots: usize, links: usize, slot_duration: f64, cells: &[Option<f64>]) -> Result<Self> {
        if cells.len() != slots * links {
            return Err(Error::LengthMismatch(cells.len(), slots * links));
        }
        let mut m = Self::missing(slots, links, slot_duration);
        for (i, c) in cells.iter().enumerate() {
            if let Some(v) = c {
                m.values[i] = *v;
                m.mask[i] = true;
            }
        }
        Ok(m)
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn links(&self) -> usize {
        self.links
    }

    pub fn slot_duration(&self) -> f64 {
        self.slot_duration
    }

    fn idx(&self, t: usize, n: usize) -> usize {
        assert!(t < self.slots && n < self.links, "cell ({t}, {n}) out of bounds");
        t * self.links + n
    }

    pub fn get(&self, t: usize, n: usize) -> Option<f64> {
        let i = self.idx(t, n);
        self.mask[i].then_some(self.values[i])
    }

    pub fn is_observed(&self, t: usize, n: usize) -> bool {
        self.mask[self.idx(t, n)]
    }

    pub fn set(&mut self, t: usize, n: usize, value: f64) {
        let i = self.idx(t, n);
        self.values[i] = value;
        self.mask[i] = true;
    }

    pub fn clear(&mut self, t: usize, n: usize) {
        let i = self.idx(t, n);
        self.values[i] = 0.0;
        self.mask[i] = false;
    }

    /// Raw values of row `t` (missing cells read as `0.0`).
    pub fn row_values(&self, t: usize) -> &[f64] {
        &self.values[t * self.links..(t + 1) * self.links]
    }

    pub fn row_mask(&self, t: usize) -> &[bool] {
        &self.mask[t * self.links..(t + 1) * self.links]
    }

    /// Row `t` as optional cells.
    pub fn row(&self, t: usize) -> Vec<Option<f64>> {
        (0..self.links).map(|n| self.get(t, n)).collect()
    }

    pub fn row_has_observation(&self, t: usize) -> bool {
        self.row_mask(t).iter().any(|&m| m)
    }

    pub fn row_complete(&self, t: usize) -> bool {
        self.row_mask(t).iter().all(|&m| m)
    }

    pub fn column(&self, n: usize) -> Vec<Option<f64>> {
        (0..self.slots).map(|t| self.get(t, n)).collect()
    }

    pub fn observed_in_column(&self, n: usize) -> usize {
        (0..self.slots).filter(|&t| self.is_observed(t, n)).count()
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// First `rows` rows as a new matrix.
    pub fn prefix(&self, rows: usize) -> FeatureMatrix {
        let rows = rows.min(self.slots);
        Self {
            slots: rows,
            links: self.links,
            slot_duration: self.slot_duration,
            values: self.values[..rows * self.links].to_vec(),
            mask: self.mask[..rows * self.links].to_vec(),
        }
    }

    /// Same matrix restricted to the given columns, in that order.
    pub fn select_columns(&self, columns: &[usize]) -> FeatureMatrix {
        let mut out = Self::missing(self.slots, columns.len(), self.slot_duration);
        for t in 0..self.slots {
            for (j, &n) in columns.iter().enumerate() {
                if let Some(v) = self.get(t, n) {
                    out.set(t, j, v);
                }
            }
        }
        out
    }

    /// Row-major dump that encodes missing cells as `0.0`.
    pub fn to_zero_sentinel(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.mask)
            .map(|(&v, &m)| if m { v } else { 0.0 })
            .collect()
    }

    pub fn same_shape(&self, other: &FeatureMatrix) -> Result<()> {
        if self.slots != other.slots || self.links != other.links {
            return Err(Error::ShapeMismatch(self.slots, self.links, other.slots, other.links));
        }
        Ok(())
    }
}

/// How communication gaps are laid out on top of the duty cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MaskPattern {
    /// Exactly `⌈cdc·T⌉` observed cells per column, chosen uniformly.
    UniformRandom,
    /// Uniform mask plus one all-link blackout lasting `seconds`.
    Burst { seconds: f64 },
    /// Uniform mask plus `links` columns removed entirely.
    LinkOutage { links: usize },
}

// Independent random streams so the uniform mask is shared by every pattern.
const UNIFORM_STREAM: u64 = 0;
const BURST_STREAM: u64 = 1;
const OUTAGE_STREAM: u64 = 2;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Number of observed cells per column for a duty cycle.
pub fn observed_per_column(cdc: f64, slots: usize) -> usize {
    ((cdc * slots as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Burst blackout rows `[start, end)` for a given seed.
///
/// The window is placed around a seeded center so that, for one seed,
/// longer bursts contain shorter ones.
pub fn burst_window(slots: usize, slot_duration: f64, seconds: f64, seed: u64) -> (usize, usize) {
    let len = ((seconds / slot_duration) - 1e-9).ceil().max(0.0) as usize;
    let len = len.min(slots);
    let center = stream_rng(seed, BURST_STREAM).random_range(0..slots.max(1));
    let start = center.saturating_sub(len / 2).min(slots - len);
    (start, start + len)
}

/// Columns removed by a link outage; nested across `k` for one seed.
pub fn outage_columns(links: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut cols: Vec<usize> = (0..links).collect();
    cols.shuffle(&mut stream_rng(seed, OUTAGE_STREAM));
    cols.truncate(k);
    cols.sort_unstable();
    cols
}

/// Removes features to emulate a communication duty cycle `cdc`.
pub fn apply_cdc_mask(full: &FeatureMatrix, cdc: f64, pattern: MaskPattern, seed: u64) -> Result<FeatureMatrix> {
    if !(cdc > 0.0 && cdc <= 1.0) {
        return Err(Error::InvalidCdc(cdc));
    }
    if !full.is_complete() {
        return Err(Error::Precondition(
            "CDC masking expects a fully observed matrix".into(),
        ));
    }
    let (slots, links) = (full.slots, full.links);
    let keep = observed_per_column(cdc, slots);
    let mut out = full.clone();
    let mut rng = stream_rng(seed, UNIFORM_STREAM);
    let mut rows: Vec<usize> = (0..slots).collect();
    for n in 0..links {
        rows.shuffle(&mut rng);
        for &t in &rows[keep..] {
            out.clear(t, n);
        }
    }
    match pattern {
        MaskPattern::UniformRandom => {}
        MaskPattern::Burst { seconds } => {
            if !(seconds >= 0.0) {
                return Err(Error::InvalidConfig(alloc::format!("burst length {seconds} s")));
            }
            let (start, end) = burst_window(slots, full.slot_duration, seconds, seed);
            for t in start..end {
                for n in 0..links {
                    out.clear(t, n);
                }
            }
        }
        MaskPattern::LinkOutage { links: k } => {
            if k > links {
                return Err(Error::InvalidConfig(alloc::format!(
                    "outage of {k} links with only {links} links"
                )));
            }
            for n in outage_columns(links, k, seed) {
                for t in 0..slots {
                    out.clear(t, n);
                }
            }
        }
    }
    Ok(out)
}

/// Carries the most recent observation of each column forward.
///
/// Cells before the first observation of a column stay missing.
pub fn observation_matrix(p: &FeatureMatrix) -> FeatureMatrix {
    let mut out = p.clone();
    for n in 0..p.links {
        let mut last = None;
        for t in 0..p.slots {
            match p.get(t, n) {
                Some(v) => last = Some(v),
                None => {
                    if let Some(v) = last {
                        out.set(t, n, v);
                    }
                }
            }
        }
    }
    out
}

/// Slots since the most recent observation of each cell's column (`0` for
/// an observed cell, `None` before the first observation).
pub fn gap_lengths(p: &FeatureMatrix) -> Vec<Option<usize>> {
    let mut gaps = vec![None; p.slots * p.links];
    for n in 0..p.links {
        let mut since: Option<usize> = None;
        for t in 0..p.slots {
            since = if p.is_observed(t, n) {
                Some(0)
            } else {
                since.map(|g| g + 1)
            };
            gaps[t * p.links + n] = since;
        }
    }
    gaps
}

/// Trust in a carried-forward value after a gap of `gap` slots.
pub fn reliability_weight(gap: usize, horizon: usize) -> f64 {
    if gap == 0 {
        1.0
    } else if gap < horizon {
        let x = gap as f64 / horizon as f64 - 1.0;
        x * x
    } else {
        0.0
    }
}

/// Per-cell weights for carried-forward observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityMatrix {
    slots: usize,
    links: usize,
    horizon: usize,
    weights: Vec<f64>,
}

impl ReliabilityMatrix {
    pub fn weight(&self, t: usize, n: usize) -> f64 {
        assert!(t < self.slots && n < self.links);
        self.weights[t * self.links + n]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn links(&self) -> usize {
        self.links
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Quadratically decaying trust over horizon `t_w`; zero before a column's
/// first observation.
pub fn reliability_matrix(p: &FeatureMatrix, t_w: usize) -> Result<ReliabilityMatrix> {
    if t_w < 1 {
        return Err(Error::InvalidHorizon);
    }
    let weights = gap_lengths(p)
        .into_iter()
        .map(|g| g.map_or(0.0, |g| reliability_weight(g, t_w)))
        .collect();
    Ok(ReliabilityMatrix {
        slots: p.slots,
        links: p.links,
        horizon: t_w,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(cells: &[Option<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_cells(cells.len(), 1, 0.1, cells).unwrap()
    }

    fn ramp(slots: usize, links: usize) -> FeatureMatrix {
        let values = (0..slots * links).map(|i| i as f64 * 0.01 - 0.3).collect();
        FeatureMatrix::complete(slots, links, 0.1, values).unwrap()
    }

    #[test]
    fn carry_forward_rule() {
        let p = column(&[Some(1.0), None, None, Some(2.0), None]);
        let p1 = observation_matrix(&p);
        assert_eq!(p1.column(0), [Some(1.0), Some(1.0), Some(1.0), Some(2.0), Some(2.0)]);
        let full = ramp(6, 2);
        assert_eq!(observation_matrix(&full), full);
        let empty = FeatureMatrix::missing(4, 1, 0.1);
        assert_eq!(observation_matrix(&empty).column(0), [None; 4]);
    }

    #[test]
    fn leading_gap_stays_missing() {
        let p = column(&[None, None, Some(0.5), None]);
        assert_eq!(observation_matrix(&p).column(0), [None, None, Some(0.5), Some(0.5)]);
        let r = reliability_matrix(&p, 4).unwrap();
        assert_eq!(r.weight(0, 0), 0.0);
        assert_eq!(r.weight(2, 0), 1.0);
    }

    #[test]
    fn weight_curve() {
        assert_eq!(reliability_weight(0, 10), 1.0);
        assert_eq!(reliability_weight(5, 10), 0.25);
        assert_eq!(reliability_weight(10, 10), 0.0);
        assert_eq!(reliability_weight(25, 10), 0.0);
        assert!((reliability_weight(1, 10) - 0.81).abs() < 1e-15);
        assert_eq!(reliability_matrix(&ramp(3, 1), 0), Err(Error::InvalidHorizon));
    }

    #[test]
    fn cdc_counts_are_exact() {
        let full = ramp(80, 4);
        let masked = apply_cdc_mask(&full, 0.2, MaskPattern::UniformRandom, 7).unwrap();
        for n in 0..4 {
            assert_eq!(masked.observed_in_column(n), 16);
        }
        for t in 0..80 {
            for n in 0..4 {
                if let Some(v) = masked.get(t, n) {
                    assert_eq!(Some(v), full.get(t, n));
                }
            }
        }
        assert_eq!(apply_cdc_mask(&full, 1.0, MaskPattern::UniformRandom, 3).unwrap(), full);
    }

    #[test]
    fn cdc_rejects_out_of_range() {
        let full = ramp(10, 2);
        for cdc in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                apply_cdc_mask(&full, cdc, MaskPattern::UniformRandom, 1),
                Err(Error::InvalidCdc(_))
            ));
        }
    }

    #[test]
    fn burst_blanks_consecutive_rows() {
        let full = ramp(80, 4);
        let masked = apply_cdc_mask(&full, 1.0, MaskPattern::Burst { seconds: 2.0 }, 11).unwrap();
        let blank: Vec<usize> = (0..80).filter(|&t| !masked.row_has_observation(t)).collect();
        assert_eq!(blank.len(), 20);
        assert!(blank.windows(2).all(|w| w[1] == w[0] + 1));
    }

    #[test]
    fn bursts_and_outages_nest() {
        for seed in 0..20 {
            let (a0, a1) = burst_window(80, 0.1, 1.0, seed);
            let (b0, b1) = burst_window(80, 0.1, 3.0, seed);
            assert!(b0 <= a0 && a1 <= b1);
            let one = outage_columns(4, 1, seed);
            let two = outage_columns(4, 2, seed);
            assert!(two.contains(&one[0]));
        }
    }

    #[test]
    fn outage_removes_columns() {
        let full = ramp(30, 4);
        let masked = apply_cdc_mask(&full, 0.5, MaskPattern::LinkOutage { links: 2 }, 5).unwrap();
        let dead = (0..4).filter(|&n| masked.observed_in_column(n) == 0).count();
        assert_eq!(dead, 2);
        assert!(apply_cdc_mask(&full, 0.5, MaskPattern::LinkOutage { links: 5 }, 5).is_err());
    }

    #[test]
    fn masking_is_deterministic() {
        let full = ramp(50, 3);
        let a = apply_cdc_mask(&full, 0.3, MaskPattern::UniformRandom, 42).unwrap();
        let b = apply_cdc_mask(&full, 0.3, MaskPattern::UniformRandom, 42).unwrap();
        let c = apply_cdc_mask(&full, 0.3, MaskPattern::UniformRandom, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_sentinel_dump() {
        let p = column(&[Some(1.5), None, Some(0.0)]);
        assert_eq!(p.to_zero_sentinel(), [1.5, 0.0, 0.0]);
    }
}
