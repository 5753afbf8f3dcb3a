//! Write/read cycles of every file format, and rejection of malformed input.

use baton::formats::{
    read_csi_binary, read_csi_csv, read_feature_matrix, read_trajectory, read_weights, write_csi_binary, write_csi_csv,
    write_feature_matrix, write_trajectory, write_weights, CSI_MAGIC, WEIGHTS_MAGIC,
};
use baton::BatonError;
use baton_core::csi::{synthesize_csi, NoiseConfig, RadioConfig};
use baton_core::geometry::{default_layout, Point2};
use baton_core::matrices::FeatureMatrix;
use baton_core::track::{train_regressor, LearnedRegressor, RegressorHyperparams, TrainingSample, Trajectory};

fn trace() -> Trajectory {
    let positions = (0..20)
        .map(|k| Point2::new(-1.0 + 0.07 * k as f64, 0.3 * (0.4 * k as f64).sin()))
        .collect();
    Trajectory::new(positions, 0.1)
}

fn noisy_csi() -> baton_core::csi::CsiTrace {
    let link = default_layout(1).unwrap().remove(0);
    let noise = NoiseConfig {
        noise_power: 0.01,
        phase_drift_std: 0.02,
        static_paths: 2,
        seed: 9,
        ..NoiseConfig::default()
    };
    let short = Trajectory::new(trace().positions[..5].to_vec(), 0.1);
    synthesize_csi(&short, &link, &noise, &RadioConfig::default()).unwrap()
}

fn small_model() -> LearnedRegressor {
    let links = default_layout(4).unwrap();
    let tr = trace();
    let features = baton_core::sim::synthesize_features(
        &tr,
        &links,
        0.0,
        baton_core::sim::FeatureMode::DirectModel,
        (&NoiseConfig::default(), &RadioConfig::default()),
        0,
    )
    .unwrap();
    let hp = RegressorHyperparams {
        hidden: 4,
        epochs: 2,
        validation_fraction: 0.0,
        ..RegressorHyperparams::default()
    };
    train_regressor(
        &[TrainingSample {
            features,
            trajectory: tr,
        }],
        &hp,
    )
    .unwrap()
    .0
}

#[test]
fn feature_matrix_round_trip_keeps_missing_cells() {
    let links = default_layout(3).unwrap();
    let cells = [
        Some(0.25),
        None,
        Some(-1.0 / 3.0),
        None,
        None,
        None,
        Some(1e-17),
        Some(-0.0),
        Some(1.8),
    ];
    let m = FeatureMatrix::from_cells(3, 3, 0.1, &cells).unwrap();
    let mut buf = Vec::new();
    write_feature_matrix(&mut buf, &m, &links).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("0,1,2\n"), "{text}");
    assert!(
        text.contains("\n,,\n"),
        "an all-missing row is three empty cells: {text}"
    );
    let (back, ids) = read_feature_matrix(buf.as_slice(), 0.1).unwrap();
    assert_eq!(ids, [0, 1, 2]);
    assert_eq!(back, m);
}

#[test]
fn feature_matrix_rejects_bad_input() {
    assert!(read_feature_matrix("a,b\n1,2\n".as_bytes(), 0.1).is_err());
    assert!(read_feature_matrix("0,1\n1,x\n".as_bytes(), 0.1).is_err());
    assert!(read_feature_matrix("0,1\n1,2,3\n".as_bytes(), 0.1).is_err());
    let m = FeatureMatrix::missing(2, 2, 0.1);
    let mut sink = Vec::new();
    assert!(write_feature_matrix(&mut sink, &m, &default_layout(3).unwrap()).is_err());
}

#[test]
fn trajectory_round_trip_is_lossless() {
    let tr = trace();
    let mut buf = Vec::new();
    write_trajectory(&mut buf, &tr).unwrap();
    let back = read_trajectory(buf.as_slice(), 0.5).unwrap();
    assert_eq!(back.positions, tr.positions);
    assert!((back.slot_duration - tr.slot_duration).abs() < 1e-15);
    assert!(read_trajectory("slot,x,y\n0,1,2\n".as_bytes(), 0.1).is_err());
    let single = read_trajectory("slot,time,x,y\n0,0,1.5,2\n".as_bytes(), 0.25).unwrap();
    assert_eq!(single.slot_duration, 0.25);
    assert_eq!(single.positions, [Point2::new(1.5, 2.0)]);
}

#[test]
fn csi_csv_round_trip_is_lossless() {
    let csi = noisy_csi();
    let mut buf = Vec::new();
    write_csi_csv(&mut buf, &csi).unwrap();
    let header = String::from_utf8(buf[..40].to_vec()).unwrap();
    assert!(header.starts_with("time,re0,im0,re1,im1\n"), "{header}");
    assert_eq!(read_csi_csv(buf.as_slice(), csi.radio).unwrap(), csi);
    assert!(read_csi_csv("time,re0,im0\n0,1,0\n".as_bytes(), csi.radio).is_err());
}

#[test]
fn csi_binary_round_trip_and_layout() {
    let csi = noisy_csi();
    let mut buf = Vec::new();
    write_csi_binary(&mut buf, &csi).unwrap();
    assert_eq!(&buf[..8], CSI_MAGIC);
    assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
    assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 2);
    assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), csi.len() as u64);
    assert_eq!(buf.len(), 40 + 2 * csi.len() * 16);
    assert_eq!(read_csi_binary(buf.as_slice()).unwrap(), csi);

    let mut wrong_magic = buf.clone();
    wrong_magic[0] = b'X';
    assert!(matches!(
        read_csi_binary(wrong_magic.as_slice()),
        Err(BatonError::Format(_))
    ));
    let mut wrong_version = buf.clone();
    wrong_version[8] = 2;
    assert!(matches!(
        read_csi_binary(wrong_version.as_slice()),
        Err(BatonError::Format(_))
    ));
    assert!(matches!(
        read_csi_binary(&buf[..buf.len() - 3]),
        Err(BatonError::Format(_))
    ));
}

#[test]
fn weights_round_trip_reproduces_the_model() {
    let model = small_model();
    let mut buf = Vec::new();
    write_weights(&mut buf, &model).unwrap();
    assert_eq!(&buf[..8], WEIGHTS_MAGIC);
    let back = read_weights(buf.as_slice()).unwrap();
    assert_eq!(back.parameters(), model.parameters());
    assert_eq!(
        (back.links, back.history, back.hidden),
        (model.links, model.history, model.hidden)
    );
    let tr = trace();
    let features = FeatureMatrix::complete(tr.len(), 4, 0.1, vec![0.3; tr.len() * 4]).unwrap();
    assert_eq!(
        back.rollout(&features, tr.positions[0], tr.len()),
        model.rollout(&features, tr.positions[0], tr.len())
    );

    let mut wrong_magic = buf.clone();
    wrong_magic[..8].copy_from_slice(CSI_MAGIC);
    assert!(matches!(
        read_weights(wrong_magic.as_slice()),
        Err(BatonError::Format(_))
    ));
    let mut wrong_version = buf.clone();
    wrong_version[8..12].copy_from_slice(&7u32.to_le_bytes());
    assert!(matches!(
        read_weights(wrong_version.as_slice()),
        Err(BatonError::Format(_))
    ));
    assert!(read_weights(&buf[..buf.len() - 8]).is_err());
}
