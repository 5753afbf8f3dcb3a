//! Scenario construction: trace shapes, a random-walk generator, feature
//! synthesis and an end-to-end scenario runner.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;
// Float math for no_std builds; inherent methods take over when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

use num_traits::Euclid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::csi::{align_to_slots, extract_plcr, synthesize_csi, NoiseConfig, RadioConfig, StftConfig};
use crate::error::{Error, Result};
use crate::geometry::{default_layout, KinematicState, LinkGeometry, Point2, Vec2, DEFAULT_V_MAX};
use crate::matrices::{apply_cdc_mask, FeatureMatrix, MaskPattern};
use crate::stap::{stap_run, StapConfig, StapOutput};
use crate::track::{build_tracker, diff_velocities, InitialPosition, LearnedRegressor, TrackerConfig, Trajectory};

/// Seed streams split off a scenario's root seed.
pub const STREAM_TRAJECTORY: u64 = 1;
pub const STREAM_NOISE: u64 = 2;
pub const STREAM_MASK: u64 = 3;
pub const STREAM_CSI: u64 = 4;

/// splitmix64 of `root ⊕ stream·φ`, so every stream of every root gets an
/// unrelated seed.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    let mut z = root ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TraceKind {
    Straight,
    Turn,
    Circle,
    NShape,
    TripleTurn,
    EightShape,
    Square,
    RandomWalk,
}

impl TraceKind {
    pub const ALL: [TraceKind; 8] = [
        TraceKind::Straight,
        TraceKind::Turn,
        TraceKind::Circle,
        TraceKind::NShape,
        TraceKind::TripleTurn,
        TraceKind::EightShape,
        TraceKind::Square,
        TraceKind::RandomWalk,
    ];

    /// The six fixed shapes used for evaluation suites.
    pub const NAMED: [TraceKind; 6] = [
        TraceKind::Straight,
        TraceKind::Turn,
        TraceKind::Circle,
        TraceKind::NShape,
        TraceKind::TripleTurn,
        TraceKind::EightShape,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TraceKind::Straight => "straight",
            TraceKind::Turn => "turn",
            TraceKind::Circle => "circle",
            TraceKind::NShape => "n_shape",
            TraceKind::TripleTurn => "triple_turn",
            TraceKind::EightShape => "eight_shape",
            TraceKind::Square => "square",
            TraceKind::RandomWalk => "random_walk",
        }
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TraceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .flat_map(char::to_lowercase)
            .collect();
        TraceKind::ALL
            .into_iter()
            .find(|k| k.name().replace('_', "") == key)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown trace shape `{s}`")))
    }
}

/// Axis-aligned rectangle, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Area {
    pub min: Point2,
    pub max: Point2,
}

impl Default for Area {
    fn default() -> Self {
        Self {
            min: Point2::new(-2.4, -2.4),
            max: Point2::new(2.4, 2.4),
        }
    }
}

impl Area {
    pub fn contains(&self, p: Point2, margin: f64) -> bool {
        p.x >= self.min.x + margin
            && p.x <= self.max.x - margin
            && p.y >= self.min.y + margin
            && p.y <= self.max.y - margin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FeatureMode {
    /// Forward model plus Gaussian noise.
    DirectModel,
    /// Synthesized CSI run through the extraction front-end.
    ViaCsi,
}

/// Random-walk generator ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct WalkParams {
    /// m/s.
    pub speed: (f64, f64),
    /// m.
    pub step_length: (f64, f64),
    /// Heading change per step, radians.
    pub turn: (f64, f64),
    /// Relative per-step jitter of speed and step length around the
    /// values drawn for the whole walk.
    pub jitter: f64,
    /// Distance kept from the area border, m.
    pub margin: f64,
}

impl Default for WalkParams {
    fn default() -> Self {
        let turn = 20.0 * PI / 180.0;
        Self {
            speed: (0.5, 2.0),
            step_length: (0.4, 0.8),
            turn: (-turn, turn),
            jitter: 0.1,
            margin: 0.5,
        }
    }
}

pub const MAX_GENERATION_ATTEMPTS: usize = 1000;

/// Default std of the additive PLCR noise, m/s.
pub const DEFAULT_NOISE_STD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ScenarioConfig {
    pub area: Area,
    pub links: Vec<LinkGeometry>,
    pub trace_kind: TraceKind,
    /// Seconds.
    pub duration: f64,
    /// Features per second.
    pub feature_rate: f64,
    /// Walking speed for named shapes, m/s. `None` traverses the shape
    /// exactly once over the duration.
    pub speed: Option<f64>,
    pub walk: WalkParams,
    pub cdc: f64,
    pub mask: MaskPattern,
    /// Std of additive PLCR noise, m/s (direct mode).
    pub noise_std: f64,
    pub mode: FeatureMode,
    /// CSI impairments (CSI mode); its seed is replaced by a derived one.
    pub csi_noise: NoiseConfig,
    pub radio: RadioConfig,
    pub v_max: f64,
    /// Hand the true start position to the tracker.
    pub start_known: bool,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area: Area::default(),
            links: default_layout(4).expect("default layout is valid"),
            trace_kind: TraceKind::Straight,
            duration: 8.0,
            feature_rate: 10.0,
            speed: None,
            walk: WalkParams::default(),
            cdc: 1.0,
            mask: MaskPattern::UniformRandom,
            noise_std: DEFAULT_NOISE_STD,
            mode: FeatureMode::DirectModel,
            csi_noise: NoiseConfig::default(),
            radio: RadioConfig::default(),
            v_max: DEFAULT_V_MAX,
            start_known: true,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn slot_duration(&self) -> f64 {
        1.0 / self.feature_rate
    }

    /// Number of feature slots `T`.
    pub fn slots(&self) -> Result<usize> {
        let t = self.duration * self.feature_rate;
        if !(t >= 1.0) || (t - t.round()).abs() > 1e-9 {
            return Err(Error::InvalidConfig(alloc::format!(
                "duration × feature rate must be a positive integer, got {t}"
            )));
        }
        Ok(t.round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.slots()?;
        if !(self.v_max > 0.0) {
            return Err(Error::InvalidConfig("v_max must be positive".into()));
        }
        let (lo, hi) = self.walk.speed;
        if !(lo > 0.0 && lo <= hi && hi <= self.v_max) {
            return Err(Error::InvalidConfig("speed range must lie in (0, v_max]".into()));
        }
        if let Some(s) = self.speed {
            if !(s >= 0.0 && s <= self.v_max) {
                return Err(Error::InvalidConfig("speed must lie in [0, v_max]".into()));
            }
        }
        let (a, b) = self.walk.step_length;
        if !(a > 0.0 && a <= b) {
            return Err(Error::InvalidConfig("step length range must be positive".into()));
        }
        if !(self.walk.jitter >= 0.0 && self.walk.jitter < 1.0) {
            return Err(Error::InvalidConfig("walk jitter must lie in [0, 1)".into()));
        }
        if !(self.walk.turn.0 <= self.walk.turn.1) {
            return Err(Error::InvalidConfig("turn range is empty".into()));
        }
        if !(self.cdc > 0.0 && self.cdc <= 1.0) {
            return Err(Error::InvalidCdc(self.cdc));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidConfig("noise std must be non-negative".into()));
        }
        crate::geometry::validate_links(&self.links)
    }
}

/// Constant-velocity line.
pub fn straight(start: Point2, heading: f64, speed: f64, slots: usize, slot_duration: f64) -> Trajectory {
    let v = Vec2::from_angle(heading) * speed;
    Trajectory::new(
        (0..slots).map(|k| start + v * (k as f64 * slot_duration)).collect(),
        slot_duration,
    )
}

/// Counter-clockwise circle at constant speed starting at angle `phase`.
pub fn circle(center: Point2, radius: f64, speed: f64, phase: f64, slots: usize, slot_duration: f64) -> Trajectory {
    let omega = speed / radius;
    Trajectory::new(
        (0..slots)
            .map(|k| center + Vec2::from_angle(phase + omega * k as f64 * slot_duration) * radius)
            .collect(),
        slot_duration,
    )
}

/// Polyline with cumulative arc length.
struct Path {
    points: Vec<Point2>,
    arc: Vec<f64>,
    closed: bool,
}

impl Path {
    fn new(mut points: Vec<Point2>, closed: bool) -> Self {
        if closed {
            points.push(points[0]);
        }
        let mut arc = Vec::with_capacity(points.len());
        arc.push(0.0);
        for w in points.windows(2) {
            let last = *arc.last().unwrap();
            arc.push(last + w[0].distance(w[1]));
        }
        Self { points, arc, closed }
    }

    fn length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    /// Point at arc length `s`; closed paths wrap, open ones bounce back.
    fn at(&self, s: f64) -> Point2 {
        let len = self.length();
        let s = if self.closed {
            Euclid::rem_euclid(&s, &len)
        } else {
            let m = Euclid::rem_euclid(&s, &(2.0 * len));
            if m > len {
                2.0 * len - m
            } else {
                m
            }
        };
        let i = self.arc.partition_point(|&a| a <= s).clamp(1, self.points.len() - 1);
        let seg = self.arc[i] - self.arc[i - 1];
        let f = if seg > 0.0 { (s - self.arc[i - 1]) / seg } else { 0.0 };
        self.points[i - 1] + (self.points[i] - self.points[i - 1]) * f
    }
}

fn p(x: f64, y: f64) -> Point2 {
    Point2::new(x, y)
}

fn shape_path(kind: TraceKind) -> Path {
    match kind {
        TraceKind::Straight => Path::new(alloc::vec![p(-2.0, 0.0), p(2.0, 0.0)], false),
        TraceKind::Turn => Path::new(alloc::vec![p(-1.6, -1.2), p(1.2, -1.2), p(1.2, 1.6)], false),
        TraceKind::NShape => Path::new(
            alloc::vec![p(-1.5, -1.5), p(-1.5, 1.5), p(1.5, -1.5), p(1.5, 1.5)],
            false,
        ),
        TraceKind::TripleTurn => Path::new(
            alloc::vec![p(-1.5, 1.5), p(1.5, 1.5), p(1.5, 0.0), p(-1.5, 0.0), p(-1.5, -1.5)],
            false,
        ),
        TraceKind::Square => Path::new(
            alloc::vec![p(-1.4, -1.4), p(1.4, -1.4), p(1.4, 1.4), p(-1.4, 1.4)],
            true,
        ),
        TraceKind::Circle => Path::new(
            (0..720)
                .map(|i| Vec2::from_angle(2.0 * PI * i as f64 / 720.0) * CIRCLE_RADIUS)
                .collect(),
            true,
        ),
        TraceKind::EightShape => Path::new(
            (0..2000)
                .map(|i| {
                    let th = 2.0 * PI * i as f64 / 2000.0;
                    p(1.6 * th.sin(), 1.2 * th.sin() * th.cos())
                })
                .collect(),
            true,
        ),
        TraceKind::RandomWalk => unreachable!("random walks are generated, not drawn"),
    }
}

const CIRCLE_RADIUS: f64 = 1.2;

fn named_shape(kind: TraceKind, speed: Option<f64>, slots: usize, dt: f64) -> Trajectory {
    let span = (slots.max(2) - 1) as f64 * dt;
    if kind == TraceKind::Circle {
        let speed = speed.unwrap_or(2.0 * PI * CIRCLE_RADIUS / span);
        return circle(Point2::ZERO, CIRCLE_RADIUS, speed, -PI / 2.0, slots, dt);
    }
    let path = shape_path(kind);
    let speed = speed.unwrap_or(path.length() / span);
    Trajectory::new((0..slots).map(|k| path.at(speed * k as f64 * dt)).collect(), dt)
}

fn random_walk(area: &Area, walk: &WalkParams, slots: usize, dt: f64, rng: &mut ChaCha8Rng) -> Result<Trajectory> {
    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..=hi) } else { lo };
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let start = Point2::new(
            draw(rng, (area.min.x + walk.margin, area.max.x - walk.margin)),
            draw(rng, (area.min.y + walk.margin, area.max.y - walk.margin)),
        );
        let mut heading = rng.random_range(0.0..2.0 * PI);
        let base_speed = draw(rng, walk.speed);
        let base_length = draw(rng, walk.step_length);
        let jitter = |rng: &mut ChaCha8Rng, base: f64, (lo, hi): (f64, f64)| {
            (base * (1.0 + draw(rng, (-walk.jitter, walk.jitter)))).clamp(lo, hi)
        };
        let mut positions = Vec::with_capacity(slots);
        positions.push(start);
        let mut at = start;
        // Current step: velocity and remaining time.
        let mut velocity = Vec2::ZERO;
        let mut left = 0.0;
        let mut ok = true;
        while positions.len() < slots && ok {
            let mut remaining = dt;
            while remaining > 1e-12 {
                if left <= 1e-12 {
                    let speed = jitter(rng, base_speed, walk.speed);
                    let length = jitter(rng, base_length, walk.step_length);
                    heading += draw(rng, walk.turn);
                    velocity = Vec2::from_angle(heading) * speed;
                    left = length / speed;
                }
                let h = remaining.min(left);
                at += velocity * h;
                left -= h;
                remaining -= h;
            }
            ok = area.contains(at, walk.margin);
            positions.push(at);
        }
        if ok {
            return Ok(Trajectory::new(positions, dt));
        }
    }
    Err(Error::GenerationFailed(MAX_GENERATION_ATTEMPTS))
}

/// Ground-truth trace of a scenario. Named shapes ignore the seed.
pub fn generate_trajectory(config: &ScenarioConfig, seed: u64) -> Result<Trajectory> {
    config.validate()?;
    let slots = config.slots()?;
    let dt = config.slot_duration();
    match config.trace_kind {
        TraceKind::RandomWalk => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_walk(&config.area, &config.walk, slots, dt, &mut rng)
        }
        kind => Ok(named_shape(kind, config.speed, slots, dt)),
    }
}

/// Complete PLCR matrix of `trajectory`.
///
/// Direct mode evaluates the forward model at every slot with the backward
/// difference velocity and adds Gaussian noise of std `noise_std`. CSI mode
/// synthesizes and extracts each link; frames without motion read as zero.
pub fn synthesize_features(
    trajectory: &Trajectory,
    links: &[LinkGeometry],
    noise_std: f64,
    mode: FeatureMode,
    csi: (&NoiseConfig, &RadioConfig),
    seed: u64,
) -> Result<FeatureMatrix> {
    let slots = trajectory.len();
    let dt = trajectory.slot_duration;
    let mut m = FeatureMatrix::missing(slots, links.len(), dt);
    match mode {
        FeatureMode::DirectModel => {
            let velocities = diff_velocities(trajectory)?;
            let normal = Normal::new(0.0, noise_std).map_err(|_| Error::InvalidConfig("noise std".into()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for t in 0..slots {
                let state = KinematicState::new(trajectory.positions[t], velocities[t]);
                for (n, link) in links.iter().enumerate() {
                    let mut r = link.forward_plcr(&state)?;
                    if noise_std > 0.0 {
                        r += normal.sample(&mut rng);
                    }
                    m.set(t, n, r);
                }
            }
        }
        FeatureMode::ViaCsi => {
            let (noise, radio) = csi;
            let stft = StftConfig::for_slot(dt, radio.sample_rate);
            for (n, link) in links.iter().enumerate() {
                for p in &trajectory.positions {
                    link.fresnel_coefficients(*p)?;
                }
                let cfg = NoiseConfig {
                    seed: derive_seed(seed, n as u64),
                    ..noise.clone()
                };
                let trace = synthesize_csi(trajectory, link, &cfg, radio)?;
                let series = extract_plcr(&trace, &stft)?;
                for (t, v) in align_to_slots(&series, slots, dt).into_iter().enumerate() {
                    m.set(t, n, v.unwrap_or(0.0));
                }
            }
        }
    }
    Ok(m)
}

/// Everything a scenario run produced.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub truth: Trajectory,
    /// Complete features before masking.
    pub features: FeatureMatrix,
    /// Masked features fed to the loop.
    pub raw: FeatureMatrix,
    pub output: StapOutput,
}

/// Truth trace, complete features and masked features of a scenario.
pub fn scenario_inputs(config: &ScenarioConfig) -> Result<(Trajectory, FeatureMatrix, FeatureMatrix)> {
    config.validate()?;
    let truth = generate_trajectory(config, derive_seed(config.seed, STREAM_TRAJECTORY))?;
    let stream = match config.mode {
        FeatureMode::DirectModel => STREAM_NOISE,
        FeatureMode::ViaCsi => STREAM_CSI,
    };
    let features = synthesize_features(
        &truth,
        &config.links,
        config.noise_std,
        config.mode,
        (&config.csi_noise, &config.radio),
        derive_seed(config.seed, stream),
    )?;
    let raw = apply_cdc_mask(
        &features,
        config.cdc,
        config.mask,
        derive_seed(config.seed, STREAM_MASK),
    )?;
    Ok((truth, features, raw))
}

/// Generates, masks and tracks one scenario.
pub fn run_scenario(
    config: &ScenarioConfig,
    tracker: &TrackerConfig,
    stap: &StapConfig,
    model: Option<&LearnedRegressor>,
) -> Result<ScenarioOutcome> {
    let (truth, features, raw) = scenario_inputs(config)?;
    let mut tcfg = tracker.clone();
    if config.start_known {
        tcfg.initial = InitialPosition::Known(truth.positions[0]);
    }
    let mut t = build_tracker(&tcfg, model.cloned())?;
    let output = stap_run(&raw, &config.links, t.as_mut(), stap)?;
    Ok(ScenarioOutcome {
        truth,
        features,
        raw,
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::solve_velocity;

    #[test]
    fn straight_helper_is_parametric() {
        let tr = straight(p(-2.0, 0.0), 0.0, 1.0, 40, 0.1);
        for (k, q) in tr.positions.iter().enumerate() {
            assert!((q.x - (-2.0 + 0.1 * k as f64)).abs() < 1e-12);
            assert_eq!(q.y, 0.0);
        }
    }

    #[test]
    fn circle_helper_keeps_radius() {
        let tr = circle(p(0.3, -0.2), 1.5, 1.0, 0.4, 100, 0.1);
        for q in &tr.positions {
            assert!((q.distance(p(0.3, -0.2)) - 1.5).abs() < 1e-9);
        }
    }

    #[test]
    fn named_shapes_respect_bounds_and_speed_cap() {
        let cfg = ScenarioConfig::default();
        for kind in TraceKind::ALL.into_iter().filter(|k| *k != TraceKind::RandomWalk) {
            let tr = generate_trajectory(
                &ScenarioConfig {
                    trace_kind: kind,
                    ..cfg.clone()
                },
                0,
            )
            .unwrap();
            assert_eq!(tr.len(), 80);
            assert!(
                tr.respects_speed_cap(cfg.v_max, crate::track::DEFAULT_STEP_EPS),
                "{kind}"
            );
            assert!(tr.positions.iter().all(|q| cfg.area.contains(*q, 0.0)), "{kind}");
        }
    }

    #[test]
    fn open_shapes_end_at_their_last_vertex() {
        let cfg = ScenarioConfig {
            trace_kind: TraceKind::Turn,
            ..ScenarioConfig::default()
        };
        let tr = generate_trajectory(&cfg, 0).unwrap();
        assert!(tr.positions[0].distance(p(-1.6, -1.2)) < 1e-12);
        assert!(tr.positions[79].distance(p(1.2, 1.6)) < 1e-9);
    }

    #[test]
    fn random_walk_is_seeded() {
        let cfg = ScenarioConfig {
            trace_kind: TraceKind::RandomWalk,
            duration: 4.0,
            ..ScenarioConfig::default()
        };
        let a = generate_trajectory(&cfg, 11).unwrap();
        let b = generate_trajectory(&cfg, 11).unwrap();
        let c = generate_trajectory(&cfg, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.respects_speed_cap(cfg.v_max, 1e-9));
        assert!(a.positions.iter().all(|q| cfg.area.contains(*q, cfg.walk.margin)));
    }

    #[test]
    fn random_walk_fails_in_tiny_area() {
        let cfg = ScenarioConfig {
            trace_kind: TraceKind::RandomWalk,
            area: Area {
                min: p(-0.6, -0.6),
                max: p(0.6, 0.6),
            },
            ..ScenarioConfig::default()
        };
        assert_eq!(
            generate_trajectory(&cfg, 1).unwrap_err(),
            Error::GenerationFailed(MAX_GENERATION_ATTEMPTS)
        );
    }

    #[test]
    fn stationary_trace_gives_zero_features() {
        let links = default_layout(4).unwrap();
        let tr = Trajectory::new(alloc::vec![p(0.2, 0.3); 12], 0.1);
        let m = synthesize_features(
            &tr,
            &links,
            0.0,
            FeatureMode::DirectModel,
            (&NoiseConfig::default(), &RadioConfig::default()),
            0,
        )
        .unwrap();
        assert!(m.is_complete());
        assert!(m.to_zero_sentinel().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn direct_features_invert_exactly() {
        let links = default_layout(4).unwrap();
        let tr = named_shape(TraceKind::EightShape, None, 80, 0.1);
        let m = synthesize_features(
            &tr,
            &links,
            0.0,
            FeatureMode::DirectModel,
            (&NoiseConfig::default(), &RadioConfig::default()),
            0,
        )
        .unwrap();
        let v = diff_velocities(&tr).unwrap();
        for t in 0..80 {
            let est = solve_velocity(&m.row(t), tr.positions[t], &links, 0.0, 10.0).unwrap();
            assert!((est - v[t]).norm() < 1e-9);
        }
    }

    #[test]
    fn seeds_are_distinct_per_stream() {
        let s: Vec<u64> = (0..4).map(|k| derive_seed(7, k)).collect();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(s[i], s[j]);
            }
        }
        assert_eq!(derive_seed(7, 2), derive_seed(7, 2));
    }

    #[test]
    fn shape_names_parse() {
        for k in TraceKind::ALL {
            assert_eq!(k.name().parse::<TraceKind>().unwrap(), k);
        }
        assert_eq!("NShape".parse::<TraceKind>().unwrap(), TraceKind::NShape);
        assert!("blob".parse::<TraceKind>().is_err());
    }
}
