//! Frame-level F0 predictor: featurization, a small convolutional regressor trained
//! with an L1 loss, a joint-then-finetune schedule, and a finite-difference gradient check.

mod adam;
mod features;
mod model;
mod persist;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::Adam;
pub use features::{featurize, featurize_frames, FeatureSpec, FrameFeatures};
pub use model::{ModelShape, NamedParams, PredictorModel};
pub use persist::{decode_model, encode_model, load_model, save_model, MODEL_FORMAT};

use crate::trajectory::{LogF0Track, TrajectoryError};

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("utterance {id}: phone {symbol:?} not in the phoneme inventory")]
    UnknownPhoneme { id: String, symbol: String },
    #[error("utterance {id}: phone {index} overlaps its predecessor")]
    OverlappingIntervals { id: String, index: usize },
    #[error("utterance {id}: coverage gap: {message}")]
    CoverageGap { id: String, message: String },
    #[error("utterance {id}: speaker {speaker} unknown to the model")]
    UnknownSpeaker { id: String, speaker: String },
    #[error("speaker index {index} out of range for {count} speakers")]
    InvalidSpeaker { index: usize, count: usize },
    #[error("hop {0} must be positive")]
    InvalidHop(f64),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid training setup: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss {loss} at step {step} ({phase:?} phase)")]
    NonFiniteLoss {
        step: usize,
        phase: Phase,
        loss: f64,
    },
    #[error("model file: {0}")]
    Persist(String),
    #[error("model schema_version {found} unsupported")]
    SchemaVersionMismatch { found: u64 },
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Mean absolute difference of log values.
pub fn l1_loss(pred: &LogF0Track, oracle: &LogF0Track) -> Result<f64, PredictorError> {
    if pred.len() != oracle.len() {
        return Err(PredictorError::LengthMismatch(pred.len(), oracle.len()));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = pred
        .values_log()
        .iter()
        .zip(oracle.values_log())
        .map(|(p, o)| (p - o).abs())
        .sum();
    Ok(sum / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub joint_steps: usize,
    pub finetune_steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub channels: usize,
    pub kernel: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            joint_steps: 2000,
            finetune_steps: 2000,
            batch_size: 8,
            learning_rate: 1e-3,
            seed: 42,
            channels: 64,
            kernel: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PredictorError> {
        let bad = |m: String| Err(PredictorError::InvalidConfig(m));
        if self.joint_steps == 0 || self.finetune_steps == 0 || self.batch_size == 0 {
            return bad(format!(
                "step counts and batch size must be positive: {} / {} / {}",
                self.joint_steps, self.finetune_steps, self.batch_size
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate {} must be positive",
                self.learning_rate
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub features: FrameFeatures,
    pub oracle: LogF0Track,
    /// Target-speaker pairs are used in both phases, supporting pairs only in the joint phase.
    pub is_target: bool,
}

impl TrainingPair {
    pub fn new(
        features: FrameFeatures,
        oracle: LogF0Track,
        is_target: bool,
    ) -> Result<Self, PredictorError> {
        if features.n_frames() != oracle.len() {
            return Err(PredictorError::LengthMismatch(
                features.n_frames(),
                oracle.len(),
            ));
        }
        Ok(Self {
            features,
            oracle,
            is_target,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Joint,
    Finetune,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    /// 1-based global step.
    pub step: usize,
    pub phase: Phase,
    /// Batch loss before the step's update.
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: PredictorModel,
    /// Snapshot taken when the joint phase ended, before fine-tuning.
    pub joint_model: PredictorModel,
    pub losses: Vec<LossRecord>,
}

/// Mean L1 loss over every frame of `batch` and its (sub)gradient.
///
/// The subgradient of |r| is sign(r), taken as 0 at r = 0.
pub fn loss_and_gradient(
    model: &PredictorModel,
    batch: &[&TrainingPair],
) -> Result<(f64, Vec<f64>), PredictorError> {
    let total: usize = batch.iter().map(|p| p.oracle.len()).sum();
    let mut grad = vec![0.0; model.params().len()];
    if total == 0 {
        return Ok((0.0, grad));
    }
    let scale = 1.0 / total as f64;
    let mut loss = 0.0;
    for pair in batch {
        model.check_features(&pair.features)?;
        let acts = model.run(&pair.features);
        let d_out: Vec<f64> = acts
            .output
            .iter()
            .zip(pair.oracle.values_log())
            .map(|(y, o)| {
                let r = y - o;
                loss += r.abs();
                sign(r) * scale
            })
            .collect();
        model.backward(&pair.features, &acts, &d_out, &mut grad);
    }
    Ok((loss * scale, grad))
}

fn sign(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Cycles through a pool of pair indices in seeded shuffled epochs.
struct BatchSampler {
    pool: Vec<usize>,
    order: Vec<usize>,
    cursor: usize,
}

impl BatchSampler {
    fn new(pool: Vec<usize>) -> Self {
        Self {
            order: Vec::new(),
            cursor: 0,
            pool,
        }
    }

    fn next_batch(&mut self, size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let size = size.min(self.pool.len());
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.cursor == self.order.len() {
                self.order = self.pool.clone();
                self.order.shuffle(rng);
                self.cursor = 0;
            }
            let idx = self.order[self.cursor];
            self.cursor += 1;
            if !batch.contains(&idx) {
                batch.push(idx);
            }
        }
        batch
    }
}

/// Joint phase on all pairs, then fine-tuning on target pairs only. Deterministic in `cfg.seed`.
/// Learning rate floor as a fraction of the configured rate, reached at the end of each phase.
pub const LR_FLOOR: f64 = 0.01;

/// Cosine decay from `lr` to `lr * LR_FLOOR` over one phase of `steps` updates.
pub fn cosine_lr(lr: f64, step: usize, steps: usize) -> f64 {
    let frac = if steps > 1 {
        step as f64 / (steps - 1) as f64
    } else {
        0.0
    };
    lr * (LR_FLOOR + (1.0 - LR_FLOOR) * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos()))
}

pub fn train(pairs: &[TrainingPair], cfg: &TrainConfig) -> Result<TrainOutcome, PredictorError> {
    cfg.validate()?;
    let first = pairs
        .first()
        .ok_or_else(|| PredictorError::InvalidConfig("no training pairs".into()))?;
    let dim = first.features.dim();
    let speakers = first.features.n_speakers();
    for (i, p) in pairs.iter().enumerate() {
        if p.features.dim() != dim || p.features.n_speakers() != speakers {
            return Err(PredictorError::DimensionMismatch(format!(
                "pair {i} has {} feature dims, pair 0 has {dim}",
                p.features.dim()
            )));
        }
        if p.features.n_frames() != p.oracle.len() {
            return Err(PredictorError::LengthMismatch(
                p.features.n_frames(),
                p.oracle.len(),
            ));
        }
    }
    let target: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].is_target).collect();
    if target.is_empty() {
        return Err(PredictorError::InvalidConfig(
            "no target-speaker pairs".into(),
        ));
    }

    let mut oracle_values: Vec<f64> = pairs
        .iter()
        .flat_map(|p| p.oracle.values_log().iter().copied())
        .collect();
    if oracle_values.is_empty() {
        return Err(PredictorError::InvalidConfig(
            "training pairs have no frames".into(),
        ));
    }
    let shape = ModelShape {
        input_dim: dim,
        channels: cfg.channels,
        kernel: cfg.kernel,
    };
    let mut model = PredictorModel::init(shape, cfg.seed, median(&mut oracle_values))?;
    model.train_config = Some(*cfg);

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut opt = Adam::new(model.params().len(), cfg.learning_rate);
    let mut losses = Vec::with_capacity(cfg.joint_steps + cfg.finetune_steps);

    let phases = [
        (
            Phase::Joint,
            (0..pairs.len()).collect::<Vec<_>>(),
            cfg.joint_steps,
        ),
        (Phase::Finetune, target, cfg.finetune_steps),
    ];
    let mut joint_model = None;
    for (phase, pool, steps) in phases {
        if phase == Phase::Finetune {
            joint_model = Some(model.clone());
        }
        let mut sampler = BatchSampler::new(pool);
        for k in 0..steps {
            opt.set_lr(cosine_lr(cfg.learning_rate, k, steps));
            let batch: Vec<&TrainingPair> = sampler
                .next_batch(cfg.batch_size, &mut shuffle_rng)
                .into_iter()
                .map(|i| &pairs[i])
                .collect();
            let (loss, grad) = loss_and_gradient(&model, &batch)?;
            let step = losses.len() + 1;
            if !loss.is_finite() || !grad.iter().all(|g| g.is_finite()) {
                return Err(PredictorError::NonFiniteLoss { step, phase, loss });
            }
            losses.push(LossRecord { step, phase, loss });
            opt.step(model.params_mut(), &grad);
        }
    }
    if !model.params().iter().all(|p| p.is_finite()) {
        return Err(PredictorError::NonFiniteLoss {
            step: losses.len(),
            phase: Phase::Finetune,
            loss: f64::NAN,
        });
    }
    Ok(TrainOutcome {
        model,
        joint_model: joint_model.expect("joint phase ran"),
        losses,
    })
}

/// Mean L1 loss of the model over `pairs` (frame-weighted).
pub fn evaluate(model: &PredictorModel, pairs: &[&TrainingPair]) -> Result<f64, PredictorError> {
    Ok(loss_and_gradient(model, pairs)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    /// Weights compared against finite differences.
    pub checked: usize,
    /// Sampled weights skipped because a perturbation crossed an L1 kink.
    pub skipped: usize,
}

/// Denominator floor for relative errors of near-zero gradients.
const GRAD_FLOOR: f64 = 1e-6;
const GRAD_SAMPLES: usize = 200;

/// Compares analytic L1 gradients with central differences on a seeded sample of weights.
pub fn grad_check(
    model: &PredictorModel,
    pair: &TrainingPair,
    epsilon: f64,
) -> Result<GradCheck, PredictorError> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(PredictorError::InvalidConfig(format!(
            "gradient check epsilon {epsilon} outside [1e-7, 1e-3]"
        )));
    }
    let (_, analytic) = loss_and_gradient(model, &[pair])?;
    let base_signs = residual_signs(model, pair)?;

    let n = model.params().len();
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed ^ 0x9e37_79b9_7f4a_7c15);
    let indices = rand::seq::index::sample(&mut rng, n, GRAD_SAMPLES.min(n)).into_vec();
    let indices: BTreeSet<usize> = indices.into_iter().collect();

    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut skipped = 0;
    for idx in indices {
        let orig = probe.params()[idx];
        probe.params_mut()[idx] = orig + epsilon;
        let (plus, plus_signs) = loss_and_signs(&probe, pair)?;
        probe.params_mut()[idx] = orig - epsilon;
        let (minus, minus_signs) = loss_and_signs(&probe, pair)?;
        probe.params_mut()[idx] = orig;

        if plus_signs != base_signs || minus_signs != base_signs {
            skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic[idx];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
        worst = worst.max(rel);
        checked += 1;
    }
    Ok(GradCheck {
        max_relative_error: worst,
        checked,
        skipped,
    })
}

fn residual_signs(model: &PredictorModel, pair: &TrainingPair) -> Result<Vec<i8>, PredictorError> {
    Ok(loss_and_signs(model, pair)?.1)
}

fn loss_and_signs(
    model: &PredictorModel,
    pair: &TrainingPair,
) -> Result<(f64, Vec<i8>), PredictorError> {
    let out = model.forward(&pair.features)?;
    if out.len() != pair.oracle.len() {
        return Err(PredictorError::LengthMismatch(out.len(), pair.oracle.len()));
    }
    let mut sum = 0.0;
    let signs = out
        .iter()
        .zip(pair.oracle.values_log())
        .map(|(y, o)| {
            let r = y - o;
            sum += r.abs();
            sign(r) as i8
        })
        .collect();
    Ok((sum / out.len().max(1) as f64, signs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_track(values: &[f64]) -> LogF0Track {
        LogF0Track::from_values(0.005, values.to_vec()).unwrap()
    }

    fn toy_pair(t: usize, speaker: usize, is_target: bool) -> TrainingPair {
        let frames: Vec<(usize, f64)> = (0..t)
            .map(|i| ((i / 5) % 3, (i % 5) as f64 / 4.0))
            .collect();
        let features = FrameFeatures::from_frames(3, 2, speaker, &frames).unwrap();
        let oracle = (0..t)
            .map(|i| 5.0 + 0.2 * (i as f64 * 0.3).sin() + 0.1 * speaker as f64)
            .collect::<Vec<_>>();
        TrainingPair::new(features, log_track(&oracle), is_target).unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            joint_steps: 20,
            finetune_steps: 10,
            batch_size: 2,
            learning_rate: 1e-2,
            seed: 9,
            channels: 8,
            kernel: 5,
        }
    }

    #[test]
    fn l1_examples() {
        let a = log_track(&[5.0, 5.5, 4.5]);
        assert_eq!(l1_loss(&a, &a).unwrap(), 0.0);
        let up = a.shifted(0.1).unwrap();
        assert!((l1_loss(&up, &a).unwrap() - 0.1).abs() < 1e-12);
        let p = log_track(&[100f64.ln(), 100f64.ln()]);
        let o = log_track(&[100f64.ln(), 200f64.ln()]);
        assert!((l1_loss(&p, &o).unwrap() - 2f64.ln() / 2.0).abs() < 1e-12);
        assert!(matches!(
            l1_loss(&p, &a),
            Err(PredictorError::LengthMismatch(2, 3))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn train_requires_target_and_consistent_dims() {
        let sup = toy_pair(20, 0, false);
        assert!(matches!(
            train(std::slice::from_ref(&sup), &small_cfg()),
            Err(PredictorError::InvalidConfig(_))
        ));
        let other = TrainingPair::new(
            FrameFeatures::from_frames(4, 2, 0, &[(0, 0.0)]).unwrap(),
            log_track(&[5.0]),
            true,
        )
        .unwrap();
        assert!(matches!(
            train(&[sup, other], &small_cfg()),
            Err(PredictorError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn loss_curve_has_both_phases() {
        let pairs = vec![toy_pair(30, 0, false), toy_pair(25, 1, true)];
        let out = train(&pairs, &small_cfg()).unwrap();
        assert_eq!(out.losses.len(), 30);
        assert_eq!(out.losses[19].phase, Phase::Joint);
        assert_eq!(out.losses[20].phase, Phase::Finetune);
        assert_eq!(out.losses[29].step, 30);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let pairs = vec![
            toy_pair(30, 0, false),
            toy_pair(25, 1, true),
            toy_pair(12, 1, true),
        ];
        let a = train(&pairs, &small_cfg()).unwrap();
        let b = train(&pairs, &small_cfg()).unwrap();
        assert_eq!(a.model.params(), b.model.params());
        let la: Vec<u64> = a.losses.iter().map(|l| l.loss.to_bits()).collect();
        let lb: Vec<u64> = b.losses.iter().map(|l| l.loss.to_bits()).collect();
        assert_eq!(la, lb);
        let c = train(
            &pairs,
            &TrainConfig {
                seed: 10,
                ..small_cfg()
            },
        )
        .unwrap();
        assert_ne!(a.model.params(), c.model.params());
    }

    #[test]
    fn zero_gradient_at_exact_fit() {
        let pair = {
            let frames: Vec<(usize, f64)> = (0..10).map(|i| (i % 3, 0.5)).collect();
            TrainingPair::new(
                FrameFeatures::from_frames(3, 1, 0, &frames).unwrap(),
                log_track(&[5.25; 10]),
                true,
            )
            .unwrap()
        };
        let shape = ModelShape {
            input_dim: 5,
            channels: 4,
            kernel: 3,
        };
        let model = PredictorModel::zeros(shape, 5.25).unwrap();
        let (loss, grad) = loss_and_gradient(&model, &[&pair]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn analytic_gradient_is_deterministic() {
        let pair = toy_pair(16, 1, true);
        let model = PredictorModel::init(
            ModelShape {
                input_dim: 6,
                channels: 8,
                kernel: 5,
            },
            4,
            5.0,
        )
        .unwrap();
        let g1 = loss_and_gradient(&model, &[&pair]).unwrap().1;
        let g2 = loss_and_gradient(&model, &[&pair]).unwrap().1;
        assert_eq!(g1, g2);
    }

    #[test]
    fn grad_check_small_model() {
        let pair = toy_pair(24, 1, true);
        let model = PredictorModel::init(
            ModelShape {
                input_dim: 6,
                channels: 8,
                kernel: 5,
            },
            21,
            4.9,
        )
        .unwrap();
        let report = grad_check(&model, &pair, 1e-5).unwrap();
        assert!(report.checked >= 100, "{report:?}");
        assert!(report.max_relative_error < 1e-4, "{report:?}");
        assert!(grad_check(&model, &pair, 1e-2).is_err());
    }

    #[test]
    fn sampler_covers_pool_each_epoch() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = BatchSampler::new(vec![0, 1, 2, 3, 4]);
        let mut seen: Vec<usize> = Vec::new();
        for _ in 0..5 {
            seen.extend(s.next_batch(1, &mut rng));
        }
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
        assert_eq!(s.next_batch(9, &mut rng).len(), 5);
    }
}
