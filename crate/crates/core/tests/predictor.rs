mod common;

use std::path::PathBuf;

use f0kit::corpus::{Phone, Utterance};
use f0kit::predictor::{
    cosine_lr, evaluate, l1_loss, train, FeatureSpec, FrameFeatures, ModelShape, PredictorModel,
    TrainConfig, TrainingPair, LR_FLOOR,
};
use f0kit::trajectory::LogF0Track;
use proptest::prelude::*;

fn quick(joint: usize, finetune: usize) -> TrainConfig {
    TrainConfig {
        joint_steps: joint,
        finetune_steps: finetune,
        channels: 16,
        ..TrainConfig::default()
    }
}

#[test]
fn constant_oracle_is_learned_everywhere() {
    let level = 180f64.ln();
    let pairs: Vec<TrainingPair> = common::toy_pairs(11, 3, 50)
        .into_iter()
        .map(|p| {
            let n = p.features.n_frames();
            let oracle = LogF0Track::from_values(0.005, vec![level; n]).unwrap();
            TrainingPair::new(p.features, oracle, p.is_target).unwrap()
        })
        .collect();
    let run = train(&pairs, &quick(200, 100)).unwrap();
    for p in &pairs {
        let pred = run.model.predict(&p.features, 0.005).unwrap();
        let worst = pred
            .values_log()
            .iter()
            .map(|v| (v - level).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.02, "max deviation {worst}");
    }
}

#[test]
fn finetune_does_not_hurt_target() {
    let pairs = common::toy_pairs(12, 4, 40);
    let run = train(&pairs, &quick(300, 150)).unwrap();
    let target: Vec<_> = pairs.iter().filter(|p| p.is_target).collect();
    let before = evaluate(&run.joint_model, &target).unwrap();
    let after = evaluate(&run.model, &target).unwrap();
    assert!(after <= before * 1.05, "{before} -> {after}");
}

#[test]
fn overfit_prediction_matches_oracle() {
    let pair = common::toy_pairs(13, 1, 50).pop().unwrap();
    let oracle = pair.oracle.clone();
    let features = pair.features.clone();
    let cfg = TrainConfig {
        joint_steps: 250,
        finetune_steps: 250,
        batch_size: 1,
        learning_rate: 1e-2,
        ..TrainConfig::default()
    };
    let run = train(&[pair], &cfg).unwrap();
    let pred = run.model.predict(&features, 0.005).unwrap();
    assert!(pred.voiced_mask().iter().all(|&v| v));
    assert!(l1_loss(&pred, &oracle).unwrap() < 0.05);
}

#[test]
fn loss_records_follow_phases() {
    let pairs = common::toy_pairs(14, 2, 30);
    let run = train(&pairs, &quick(7, 3)).unwrap();
    let steps: Vec<usize> = run.losses.iter().map(|l| l.step).collect();
    assert_eq!(steps, (1..=10).collect::<Vec<_>>());
}

#[test]
fn feature_spec_on_corpus_utterance() {
    let utt = Utterance {
        id: "u".into(),
        audio_path: PathBuf::from("u.wav"),
        speaker_id: "s2".into(),
        phones: vec![
            Phone {
                symbol: "b".into(),
                start_s: 0.0,
                end_s: 0.02,
            },
            Phone {
                symbol: "a".into(),
                start_s: 0.02,
                end_s: 0.05,
            },
        ],
    };
    let spec = FeatureSpec {
        hop_s: 0.005,
        phonemes: vec!["a".into(), "b".into()],
        speakers: vec!["s1".into(), "s2".into()],
    };
    let f = spec.featurize(&utt).unwrap();
    assert_eq!(f.n_frames(), 10);
    assert_eq!(f.dim(), spec.input_dim());
    // b covers frames 0..4, a covers 4..10
    assert_eq!(&f.row(0)[..2], &[0.0, 1.0]);
    assert_eq!(&f.row(4)[..2], &[1.0, 0.0]);
    assert_eq!(f.row(4)[2], 0.0);
    assert_eq!(f.row(9)[2], 1.0);
    assert_eq!(&f.row(5)[3..], &[0.0, 1.0]);
}

#[test]
fn cosine_schedule_endpoints() {
    assert_eq!(cosine_lr(1e-3, 0, 100), 1e-3);
    assert!((cosine_lr(1e-3, 99, 100) - 1e-3 * LR_FLOOR).abs() < 1e-18);
    assert_eq!(cosine_lr(1e-3, 0, 1), 1e-3);
    let lrs: Vec<f64> = (0..50).map(|k| cosine_lr(0.1, k, 50)).collect();
    assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
}

fn random_features(n_frames: usize, phones: &[usize]) -> FrameFeatures {
    let frames: Vec<(usize, f64)> = (0..n_frames)
        .map(|i| (phones[i % phones.len()], (i % 7) as f64 / 6.0))
        .collect();
    FrameFeatures::from_frames(
        common::TOY_PHONEMES,
        common::TOY_SPEAKERS,
        n_frames % 2,
        &frames,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn predict_is_pure_and_shaped(
        n in 1usize..80,
        phones in prop::collection::vec(0usize..common::TOY_PHONEMES, 1..6),
        seed in any::<u64>(),
    ) {
        let f = random_features(n, &phones);
        let shape = ModelShape { input_dim: f.dim(), channels: 8, kernel: 5 };
        let model = PredictorModel::init(shape, seed, 5.0).unwrap();
        let a = model.predict(&f, 0.005).unwrap();
        let b = model.predict(&f, 0.005).unwrap();
        prop_assert_eq!(a.len(), n);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn l1_is_mean_absolute_offset(values in prop::collection::vec(4.0f64..6.0, 1..50), c in -0.5f64..0.5) {
        let a = LogF0Track::from_values(0.005, values.clone()).unwrap();
        let b = LogF0Track::from_values(0.005, values.iter().map(|v| v + c).collect()).unwrap();
        prop_assert!((l1_loss(&a, &b).unwrap() - c.abs()).abs() < 1e-12);
        prop_assert_eq!(l1_loss(&a, &b).unwrap(), l1_loss(&b, &a).unwrap());
    }
}
