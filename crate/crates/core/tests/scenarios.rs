//! End-to-end behaviour of the simulator, the trackers and the STAP loop on
//! simulated scenarios.

use baton_core::csi::{bin_equivalent_plcr, StftConfig};
use baton_core::geometry::KinematicState;
use baton_core::geometry::{default_layout, Point2, Vec2};
use baton_core::matrices::{FeatureMatrix, MaskPattern};
use baton_core::metrics::{evaluate_run, median, plcr_mse, ratio_spreads, tracking_errors, MseScope};
use baton_core::sim::{
    derive_seed, generate_trajectory, run_scenario, scenario_inputs, synthesize_features, FeatureMode, ScenarioConfig,
    TraceKind, STREAM_NOISE,
};
use baton_core::stap::{stap_run, StapConfig};
use baton_core::track::{
    bootstrap_trace, diff_velocities, predict_trace, train_regressor, InitialPosition, LearnedTracker, ModelInversion,
    RegressorHyperparams, Tracker, TrackerConfig, TrainingSample, Trajectory, DEFAULT_STEP_EPS,
};
use baton_core::Error;

/// Noiseless direct-model scenario.
fn scenario(kind: TraceKind, cdc: f64, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        trace_kind: kind,
        cdc,
        seed,
        noise_std: 0.0,
        ..Default::default()
    }
}

fn known(start: Point2) -> TrackerConfig {
    TrackerConfig::default().with_start(start)
}

#[test]
fn straight_shape_at_fixed_speed_is_parametric() {
    let cfg = ScenarioConfig {
        trace_kind: TraceKind::Straight,
        duration: 4.0,
        speed: Some(1.0),
        ..Default::default()
    };
    let tr = generate_trajectory(&cfg, 0).unwrap();
    assert_eq!(tr.len(), 40);
    for (k, q) in tr.positions.iter().enumerate() {
        assert!((q.x - (-2.0 + 0.1 * k as f64)).abs() < 1e-9, "slot {k}: {q:?}");
        assert!(q.y.abs() < 1e-12);
    }
}

#[test]
fn csi_features_agree_with_the_model_within_one_bin() {
    let cfg = ScenarioConfig {
        trace_kind: TraceKind::Straight,
        ..Default::default()
    };
    let truth = generate_trajectory(&cfg, 0).unwrap();
    let direct = synthesize_features(
        &truth,
        &cfg.links,
        0.0,
        FeatureMode::DirectModel,
        (&cfg.csi_noise, &cfg.radio),
        0,
    )
    .unwrap();
    let via_csi = synthesize_features(
        &truth,
        &cfg.links,
        0.0,
        FeatureMode::ViaCsi,
        (&cfg.csi_noise, &cfg.radio),
        0,
    )
    .unwrap();
    let bin = bin_equivalent_plcr(
        &StftConfig::for_slot(truth.slot_duration, cfg.radio.sample_rate),
        &cfg.radio,
    );
    // Slot 0 has no backward difference in the model; skip it.
    for t in 1..truth.len() {
        for n in 0..cfg.links.len() {
            let d = direct.get(t, n).unwrap();
            let c = via_csi.get(t, n).unwrap();
            assert!((d - c).abs() < bin, "slot {t} link {n}: model {d} csi {c} bin {bin}");
        }
    }
}

#[test]
fn bootstrap_follows_noiseless_truth() {
    let cfg = scenario(TraceKind::Turn, 1.0, 0);
    let (truth, features, _) = scenario_inputs(&cfg).unwrap();
    let tc = known(truth.positions[0]);
    let boot = bootstrap_trace(&features.prefix(tc.n_f), &cfg.links, &tc).unwrap();
    assert_eq!(boot.len(), tc.n_f);
    for (k, (a, b)) in boot.positions.iter().zip(&truth.positions).enumerate() {
        assert!(a.distance(*b) < 0.05 * (k + 1) as f64, "slot {k}");
    }
}

#[test]
fn stationary_bootstrap_stays_put() {
    let links = default_layout(4).unwrap();
    let zeros = FeatureMatrix::complete(2, 4, 0.1, vec![0.0; 8]).unwrap();
    let start = Point2::new(0.3, -0.7);
    let tc = TrackerConfig { n_f: 2, ..known(start) };
    let boot = bootstrap_trace(&zeros, &links, &tc).unwrap();
    assert_eq!(boot.positions, vec![start, start]);
}

#[test]
fn one_link_bootstrap_is_under_determined() {
    let links = default_layout(1).unwrap();
    let m = FeatureMatrix::complete(10, 1, 0.1, vec![0.5; 10]).unwrap();
    let err = bootstrap_trace(&m, &links, &known(Point2::ZERO)).unwrap_err();
    assert!(matches!(err, Error::InsufficientLinks(_)));
}

#[test]
fn next_step_on_complete_data_is_correct() {
    let cfg = scenario(TraceKind::Circle, 1.0, 0);
    let (truth, features, raw) = scenario_inputs(&cfg).unwrap();
    let tc = known(truth.positions[0]);
    let prev = truth.prefix(tc.n_f);
    let next = predict_trace(&features, &raw, tc.n_f, &cfg.links, &tc, &prev).unwrap();
    assert_eq!(next.len(), tc.n_f + 1);
    assert!(next.positions[tc.n_f].distance(truth.positions[tc.n_f]) < 0.02);
}

#[test]
fn refinement_pulls_a_corrupted_slot_back() {
    let cfg = scenario(TraceKind::Straight, 1.0, 0);
    let (truth, features, raw) = scenario_inputs(&cfg).unwrap();
    let tc = known(truth.positions[0]);
    let upto = 20;
    let bad = upto - 3;
    let mut prev = truth.prefix(upto);
    prev.positions[bad] += Vec2::new(0.0, 0.5);
    let initial = prev.positions[bad].distance(truth.positions[bad]);
    for i in upto..upto + tc.refine_window {
        prev = predict_trace(&features, &raw, i, &cfg.links, &tc, &prev).unwrap();
    }
    let after = prev.positions[bad].distance(truth.positions[bad]);
    assert!(after < initial, "error at corrupted slot {initial} -> {after}");
}

#[test]
fn wrong_previous_length_is_rejected() {
    let cfg = scenario(TraceKind::Straight, 1.0, 0);
    let (truth, features, raw) = scenario_inputs(&cfg).unwrap();
    let tc = known(truth.positions[0]);
    let err = predict_trace(&features, &raw, 12, &cfg.links, &tc, &truth.prefix(10)).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
}

#[test]
fn future_rows_do_not_change_past_output() {
    let cfg = ScenarioConfig {
        noise_std: 0.1,
        ..scenario(TraceKind::TripleTurn, 0.2, 3)
    };
    let (truth, _, raw) = scenario_inputs(&cfg).unwrap();
    let stap = StapConfig {
        record_snapshots: true,
        ..Default::default()
    };
    let run = |m: &FeatureMatrix| {
        let mut tr = ModelInversion::new(known(truth.positions[0])).unwrap();
        stap_run(m, &cfg.links, &mut tr, &stap).unwrap()
    };
    let base = run(&raw);
    for cut in [15, 40, 70] {
        let mut mutated = raw.clone();
        for t in cut..raw.slots() {
            for n in 0..raw.links() {
                if t % 2 == 0 {
                    mutated.set(t, n, 1.7 - 0.1 * n as f64);
                } else {
                    mutated.clear(t, n);
                }
            }
        }
        let out = run(&mutated);
        for t in 0..cut {
            assert_eq!(
                out.filled.row(t),
                base.filled.row(t),
                "row {t} changed after mutating from {cut}"
            );
        }
        // Each iteration's trace only saw rows up to its own slot.
        let before = |o: &baton_core::stap::StapOutput| -> Vec<Trajectory> {
            o.diagnostics
                .iter()
                .filter(|d| d.slot < cut)
                .map(|d| d.snapshot.clone().unwrap())
                .collect()
        };
        let (a, b) = (before(&out), before(&base));
        assert!(!a.is_empty());
        assert_eq!(a, b, "trace snapshots before slot {cut} changed");
    }
}

#[test]
fn outputs_respect_the_speed_cap() {
    for (k, kind) in TraceKind::NAMED.into_iter().enumerate() {
        let cfg = ScenarioConfig {
            noise_std: 0.3,
            ..scenario(kind, 0.2, k as u64)
        };
        let out = run_scenario(&cfg, &TrackerConfig::default(), &StapConfig::default(), None).unwrap();
        for v in diff_velocities(&out.output.trace).unwrap() {
            assert!(
                v.norm() <= cfg.v_max + DEFAULT_STEP_EPS / cfg.slot_duration(),
                "{kind}: {v:?}"
            );
        }
        assert!(out.output.trace.respects_speed_cap(cfg.v_max, DEFAULT_STEP_EPS));
    }
}

#[test]
fn fixed_seed_runs_are_identical() {
    let cfg = ScenarioConfig {
        noise_std: 0.1,
        ..scenario(TraceKind::RandomWalk, 0.3, 11)
    };
    let cfg = ScenarioConfig { duration: 4.0, ..cfg };
    let a = run_scenario(&cfg, &TrackerConfig::default(), &StapConfig::default(), None).unwrap();
    let b = run_scenario(&cfg, &TrackerConfig::default(), &StapConfig::default(), None).unwrap();
    assert_eq!(a.truth, b.truth);
    assert_eq!(a.raw, b.raw);
    assert_eq!(a.output.trace, b.output.trace);
    assert_eq!(a.output.filled, b.output.filled);
    assert_ne!(derive_seed(11, STREAM_NOISE), derive_seed(12, STREAM_NOISE));
}

#[test]
fn sparse_noiseless_straight_run_stays_accurate() {
    let cfg = scenario(TraceKind::Straight, 0.2, 5);
    let out = run_scenario(&cfg, &TrackerConfig::default(), &StapConfig::default(), None).unwrap();
    let report = evaluate_run("straight", &out, 0.5).unwrap();
    assert!(
        report.tracking.summary.median < 0.5,
        "median {}",
        report.tracking.summary.median
    );
    assert!(report.mse_missing.overall < 0.25, "mse {}", report.mse_missing.overall);
}

#[test]
fn complete_input_is_left_untouched() {
    let cfg = scenario(TraceKind::EightShape, 1.0, 0);
    let out = run_scenario(&cfg, &TrackerConfig::default(), &StapConfig::default(), None).unwrap();
    assert_eq!(out.output.filled, out.features);
    let all = plcr_mse(&out.output.filled, &out.features, &out.raw, MseScope::All).unwrap();
    assert_eq!(all.overall, 0.0);
    let errs = tracking_errors(&out.output.trace, &out.truth).unwrap();
    assert!(errs.summary.median < 0.05);
}

#[test]
fn bursts_and_outages_run_to_completion() {
    for mask in [
        MaskPattern::Burst { seconds: 2.0 },
        MaskPattern::LinkOutage { links: 2 },
    ] {
        let cfg = ScenarioConfig {
            mask,
            noise_std: 0.1,
            ..scenario(TraceKind::Turn, 0.2, 1)
        };
        let out = run_scenario(&cfg, &TrackerConfig::default(), &StapConfig::default(), None).unwrap();
        assert_eq!(out.output.trace.len(), out.truth.len());
    }
}

fn straight_sample(start: Point2, heading: f64, speed: f64) -> TrainingSample {
    let links = default_layout(4).unwrap();
    let trajectory = baton_core::sim::straight(start, heading, speed, 40, 0.1);
    let cfg = ScenarioConfig::default();
    let features = synthesize_features(
        &trajectory,
        &links,
        0.0,
        FeatureMode::DirectModel,
        (&cfg.csi_noise, &cfg.radio),
        0,
    )
    .unwrap();
    TrainingSample { features, trajectory }
}

#[test]
fn learned_regressor_overfits_one_trace() {
    let sample = straight_sample(Point2::new(-1.5, -1.0), 0.4, 0.8);
    let hp = RegressorHyperparams {
        epochs: 600,
        validation_fraction: 0.0,
        ..Default::default()
    };
    let (model, report) = train_regressor(std::slice::from_ref(&sample), &hp).unwrap();
    assert_eq!(report.samples, 39);
    let links = default_layout(4).unwrap();
    let mut tracker = LearnedTracker::new(
        model,
        TrackerConfig {
            initial: InitialPosition::Known(sample.trajectory.positions[0]),
            ..Default::default()
        },
    )
    .unwrap();
    let mut trace = tracker.bootstrap(&sample.features.prefix(10), &links).unwrap();
    for i in 10..sample.features.slots() {
        trace = tracker
            .predict_trace(&sample.features, &sample.features, i, &links, &trace)
            .unwrap();
    }
    let errs = tracking_errors(&trace, &sample.trajectory).unwrap();
    assert!(errs.summary.max < 0.1, "max error {}", errs.summary.max);
}

#[test]
fn empty_dataset_is_rejected() {
    let err = train_regressor(&[], &RegressorHyperparams::default()).unwrap_err();
    assert_eq!(err, Error::EmptyDataset);
}

#[test]
fn wider_hidden_layer_does_not_hurt_on_average() {
    let mut data = Vec::new();
    for i in 0..8 {
        let th = i as f64 * 0.8;
        let start = Point2::new(-1.2 * th.cos(), -1.2 * th.sin());
        data.push(straight_sample(start, th, 0.5 + 0.15 * i as f64));
    }
    let loss = |hidden: usize| -> f64 {
        (0..5)
            .map(|seed| {
                let hp = RegressorHyperparams {
                    hidden,
                    seed,
                    epochs: 150,
                    ..Default::default()
                };
                train_regressor(&data, &hp).unwrap().1.validation_loss
            })
            .sum::<f64>()
            / 5.0
    };
    let (narrow, wide) = (loss(2), loss(32));
    assert!(wide <= narrow, "hidden 2: {narrow}, hidden 32: {wide}");
}

/// Noiseless PLCR series of every link along a trace.
fn plcr_columns(tr: &Trajectory) -> Vec<Vec<f64>> {
    let v = diff_velocities(tr).unwrap();
    default_layout(4)
        .unwrap()
        .iter()
        .map(|l| {
            (0..tr.len())
                .map(|t| l.forward_plcr(&KinematicState::new(tr.positions[t], v[t])).unwrap())
                .collect()
        })
        .collect()
}

/// Spreads of every link pair's ratio over windows of `window` slots.
fn pair_spreads(tr: &Trajectory, window: usize, floor: f64) -> Vec<f64> {
    let r = plcr_columns(tr);
    let mut out = Vec::new();
    for a in 0..r.len() {
        for b in a + 1..r.len() {
            // Slot 0 repeats slot 1's velocity.
            out.extend(ratio_spreads(&r[a][1..], &r[b][1..], window, floor).unwrap());
        }
    }
    out
}

#[test]
fn cross_link_ratio_is_steadier_over_shorter_spans() {
    let traces: Vec<Trajectory> = TraceKind::NAMED
        .into_iter()
        .map(|k| generate_trajectory(&scenario(k, 1.0, 0), 0).unwrap())
        .collect();
    let medians: Vec<f64> = [2, 3, 5, 10]
        .into_iter()
        .map(|w| median(&traces.iter().flat_map(|t| pair_spreads(t, w, 0.1)).collect::<Vec<_>>()))
        .collect();
    assert!(medians.windows(2).all(|m| m[0] < m[1]), "{medians:?}");
}

/// The literal half-second bound: every 5-slot window of a constant-speed
/// straight walk keeps the ratio spread below 10 % wherever both PLCRs
/// exceed 0.1 m/s. In a 4.8 m room the link geometry changes too much over
/// half a meter of walking for this to hold.
#[test]
#[ignore = "does not hold in the default 4.8 m layout; see the README"]
fn cross_link_ratio_is_stable_over_half_a_second() {
    let tr = generate_trajectory(
        &ScenarioConfig {
            speed: Some(1.0),
            ..scenario(TraceKind::Straight, 1.0, 0)
        },
        0,
    )
    .unwrap();
    let worst = pair_spreads(&tr, 5, 0.1).into_iter().fold(0.0, f64::max);
    assert!(worst < 0.1, "worst spread {worst}");
}
