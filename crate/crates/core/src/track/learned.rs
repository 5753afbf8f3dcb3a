//! Small feed-forward regressor trained on simulated traces.
//!
//! Input: the last `history` PLCR rows (scaled by `v_max`) and the current
//! position estimate (scaled by `position_scale`). Output: the next
//! displacement divided by `v_max · slot`. One tanh hidden layer, trained
//! with Adam on mean squared error.

use alloc::vec;
use alloc::vec::Vec;
// Float math for no_std builds; inherent methods take over when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{InitialPosition, Tracker, TrackerConfig, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{LinkGeometry, Point2, Vec2};
use crate::matrices::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RegressorHyperparams {
    pub hidden: usize,
    pub history: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub v_max: f64,
    pub position_scale: f64,
    pub seed: u64,
}

impl Default for RegressorHyperparams {
    fn default() -> Self {
        Self {
            hidden: 32,
            history: 2,
            epochs: 300,
            learning_rate: 0.01,
            batch_size: 64,
            validation_fraction: 0.2,
            v_max: 2.0,
            position_scale: 2.4,
            seed: 0,
        }
    }
}

impl RegressorHyperparams {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidHyperparams(m.into()));
        if self.hidden == 0 || self.history == 0 || self.epochs == 0 || self.batch_size == 0 {
            return bad("hidden, history, epochs and batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)");
        }
        if !(self.v_max > 0.0 && self.position_scale > 0.0) {
            return bad("scales must be positive");
        }
        Ok(())
    }
}

/// One simulated (complete PLCR matrix, ground-truth trace) pair.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub features: FeatureMatrix,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingReport {
    pub samples: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedRegressor {
    pub links: usize,
    pub history: usize,
    pub hidden: usize,
    pub slot_duration: f64,
    pub v_max: f64,
    pub position_scale: f64,
    /// `hidden × input` row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `2 × hidden` row-major.
    pub w2: Vec<f64>,
    pub b2: [f64; 2],
}

impl LearnedRegressor {
    pub fn input_dim(&self) -> usize {
        self.links * self.history + 2
    }

    /// Number of trainable parameters.
    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 2
    }

    /// Parameters flattened as `w1, b1, w2, b2`.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.extend_from_slice(&self.b2);
        out
    }

    /// Rebuilds a regressor from its shape and flattened parameters.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parameters(
        links: usize,
        history: usize,
        hidden: usize,
        slot_duration: f64,
        v_max: f64,
        position_scale: f64,
        params: &[f64],
    ) -> Result<Self> {
        let input = links * history + 2;
        let expected = hidden * input + hidden + 2 * hidden + 2;
        if params.len() != expected {
            return Err(Error::LengthMismatch(params.len(), expected));
        }
        let (w1, rest) = params.split_at(hidden * input);
        let (b1, rest) = rest.split_at(hidden);
        let (w2, b2) = rest.split_at(2 * hidden);
        Ok(Self {
            links,
            history,
            hidden,
            slot_duration,
            v_max,
            position_scale,
            w1: w1.to_vec(),
            b1: b1.to_vec(),
            w2: w2.to_vec(),
            b2: [b2[0], b2[1]],
        })
    }

    fn encode(&self, rows: &FeatureMatrix, t: usize, position: Point2, out: &mut Vec<f64>) {
        encode_input(rows, t, position, self.history, self.v_max, self.position_scale, out);
    }

    fn forward(&self, x: &[f64], hidden: &mut [f64]) -> [f64; 2] {
        let input = self.input_dim();
        for (h, out) in hidden.iter_mut().enumerate() {
            let w = &self.w1[h * input..(h + 1) * input];
            let z: f64 = self.b1[h] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            *out = z.tanh();
        }
        let mut y = self.b2;
        for (o, yo) in y.iter_mut().enumerate() {
            *yo += self.w2[o * self.hidden..(o + 1) * self.hidden]
                .iter()
                .zip(hidden.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
        y
    }

    /// Displacement over slot `t` starting from `position`.
    pub fn step(&self, rows: &FeatureMatrix, t: usize, position: Point2) -> Vec2 {
        let mut x = Vec::with_capacity(self.input_dim());
        self.encode(rows, t, position, &mut x);
        let mut hidden = vec![0.0; self.hidden];
        let y = self.forward(&x, &mut hidden);
        let scale = self.v_max * self.slot_duration;
        Vec2::new(y[0], y[1]).clamp_norm(1.0) * scale
    }

    /// Dead-reckoned trace over the first `rows` rows of `features`.
    pub fn rollout(&self, features: &FeatureMatrix, start: Point2, rows: usize) -> Trajectory {
        let mut positions = Vec::with_capacity(rows);
        let mut p = start;
        positions.push(p);
        for t in 1..rows {
            p += self.step(features, t, p);
            positions.push(p);
        }
        Trajectory::new(positions, features.slot_duration())
    }
}

fn encode_input(
    rows: &FeatureMatrix,
    t: usize,
    position: Point2,
    history: usize,
    v_max: f64,
    position_scale: f64,
    out: &mut Vec<f64>,
) {
    out.clear();
    for h in 0..history {
        let k = t.saturating_sub(h);
        // Missing cells read as zero.
        out.extend(rows.row_values(k).iter().map(|r| r / v_max));
    }
    out.push(position.x / position_scale);
    out.push(position.y / position_scale);
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

fn mse(model: &LearnedRegressor, data: &[(Vec<f64>, [f64; 2])]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let mut hidden = vec![0.0; model.hidden];
    let total: f64 = data
        .iter()
        .map(|(x, y)| {
            let p = model.forward(x, &mut hidden);
            (p[0] - y[0]).powi(2) + (p[1] - y[1]).powi(2)
        })
        .sum();
    total / (2 * data.len()) as f64
}

/// Trains a regressor on simulated pairs; deterministic given `hp.seed`.
pub fn train_regressor(
    dataset: &[TrainingSample],
    hp: &RegressorHyperparams,
) -> Result<(LearnedRegressor, TrainingReport)> {
    hp.validate()?;
    let first = dataset.first().ok_or(Error::EmptyDataset)?;
    let links = first.features.links();
    let slot = first.features.slot_duration();
    let mut data: Vec<(Vec<f64>, [f64; 2])> = Vec::new();
    for s in dataset {
        if s.features.links() != links || (s.features.slot_duration() - slot).abs() > 1e-12 {
            return Err(Error::InvalidHyperparams(
                "samples must share link count and slot duration".into(),
            ));
        }
        if s.trajectory.len() != s.features.slots() {
            return Err(Error::LengthMismatch(s.trajectory.len(), s.features.slots()));
        }
        let scale = hp.v_max * slot;
        for t in 1..s.trajectory.len() {
            let prev = s.trajectory.positions[t - 1];
            let d = (s.trajectory.positions[t] - prev) / scale;
            let mut x = Vec::new();
            encode_input(&s.features, t, prev, hp.history, hp.v_max, hp.position_scale, &mut x);
            data.push((x, [d.x, d.y]));
        }
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    data.shuffle(&mut rng);
    let n_val = ((data.len() as f64) * hp.validation_fraction) as usize;
    let n_val = n_val.min(data.len() - 1);
    let (train, val) = data.split_at(data.len() - n_val);
    let mut train = train.to_vec();

    let input = links * hp.history + 2;
    let bound1 = (6.0 / (input + hp.hidden) as f64).sqrt();
    let bound2 = (6.0 / (hp.hidden + 2) as f64).sqrt();
    let mut model = LearnedRegressor {
        links,
        history: hp.history,
        hidden: hp.hidden,
        slot_duration: slot,
        v_max: hp.v_max,
        position_scale: hp.position_scale,
        w1: (0..hp.hidden * input)
            .map(|_| rng.random_range(-bound1..bound1))
            .collect(),
        b1: vec![0.0; hp.hidden],
        w2: (0..2 * hp.hidden).map(|_| rng.random_range(-bound2..bound2)).collect(),
        b2: [0.0; 2],
    };

    let n_params = model.parameter_count();
    let mut adam = Adam::new(n_params);
    let mut grad = vec![0.0; n_params];
    let mut hidden = vec![0.0; hp.hidden];
    let (o_b1, o_w2, o_b2) = (
        hp.hidden * input,
        hp.hidden * input + hp.hidden,
        hp.hidden * input + 3 * hp.hidden,
    );
    for epoch in 0..hp.epochs {
        train.shuffle(&mut rng);
        // Step decay: the last third of training runs at a tenth of the rate.
        let lr = if epoch * 3 >= hp.epochs * 2 {
            hp.learning_rate * 0.1
        } else {
            hp.learning_rate
        };
        for batch in train.chunks(hp.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let inv = 1.0 / batch.len() as f64;
            for (x, y) in batch {
                let out = model.forward(x, &mut hidden);
                let e = [(out[0] - y[0]) * inv, (out[1] - y[1]) * inv];
                grad[o_b2] += e[0];
                grad[o_b2 + 1] += e[1];
                for h in 0..hp.hidden {
                    grad[o_w2 + h] += e[0] * hidden[h];
                    grad[o_w2 + hp.hidden + h] += e[1] * hidden[h];
                    let back = e[0] * model.w2[h] + e[1] * model.w2[hp.hidden + h];
                    let dz = back * (1.0 - hidden[h] * hidden[h]);
                    grad[o_b1 + h] += dz;
                    for (i, xi) in x.iter().enumerate() {
                        grad[h * input + i] += dz * xi;
                    }
                }
            }
            let mut params = model.parameters();
            adam.update(&mut params, &grad, lr);
            model = LearnedRegressor::from_parameters(
                links,
                hp.history,
                hp.hidden,
                slot,
                hp.v_max,
                hp.position_scale,
                &params,
            )?;
        }
    }
    let report = TrainingReport {
        samples: data.len(),
        train_loss: mse(&model, &train),
        validation_loss: mse(&model, val),
    };
    Ok((model, report))
}

/// Tracker that rolls the regressor out over the whole prefix each call.
#[derive(Debug, Clone)]
pub struct LearnedTracker {
    pub model: LearnedRegressor,
    pub config: TrackerConfig,
}

impl LearnedTracker {
    pub fn new(model: LearnedRegressor, config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { model, config })
    }

    fn start(&self) -> Point2 {
        match self.config.initial {
            InitialPosition::Known(p) => p,
            InitialPosition::Region { min, max, .. } => (min + max) * 0.5,
        }
    }

    fn check_links(&self, features: &FeatureMatrix, links: &[LinkGeometry]) -> Result<()> {
        if features.links() != self.model.links || links.len() != self.model.links {
            return Err(Error::LengthMismatch(features.links(), self.model.links));
        }
        Ok(())
    }
}

impl Tracker for LearnedTracker {
    fn bootstrap(&mut self, p1_prefix: &FeatureMatrix, links: &[LinkGeometry]) -> Result<Trajectory> {
        self.check_links(p1_prefix, links)?;
        let rows = self.config.n_f.min(p1_prefix.slots());
        Ok(self.model.rollout(p1_prefix, self.start(), rows))
    }

    fn predict_trace(
        &mut self,
        filled: &FeatureMatrix,
        _raw: &FeatureMatrix,
        upto: usize,
        links: &[LinkGeometry],
        previous: &Trajectory,
    ) -> Result<Trajectory> {
        self.check_links(filled, links)?;
        if previous.len() != upto || upto >= filled.slots() {
            return Err(Error::Precondition(alloc::format!(
                "previous trace has {} slots, expected {upto}",
                previous.len()
            )));
        }
        Ok(self.model.rollout(filled, self.start(), upto + 1))
    }
}
