//! Temporal F0 regressor: per-frame input projection, two tanh 1-D convolutions
//! with "same" zero padding, and a linear output head.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureSpec, FrameFeatures, PredictorError, TrainConfig};
use crate::trajectory::{LogF0Track, MAX_LOG_F0, MIN_LOG_F0};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_dim: usize,
    pub channels: usize,
    pub kernel: usize,
}

impl ModelShape {
    pub fn validate(&self) -> Result<(), PredictorError> {
        if self.input_dim == 0
            || self.channels == 0
            || self.kernel == 0
            || self.kernel.is_multiple_of(2)
        {
            return Err(PredictorError::DimensionMismatch(format!(
                "invalid model shape {self:?} (kernel must be odd)"
            )));
        }
        Ok(())
    }

    fn layout(&self) -> Layout {
        let (d, c, k) = (self.input_dim, self.channels, self.kernel);
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let w_in = take(c * d);
        let b_in = take(c);
        let w1 = take(c * k * c);
        let b1 = take(c);
        let w2 = take(c * k * c);
        let b2 = take(c);
        let w_out = take(c);
        let b_out = take(1);
        Layout {
            w_in,
            b_in,
            w1,
            b1,
            w2,
            b2,
            w_out,
            b_out,
            total: at,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

type Span = std::ops::Range<usize>;

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Debug, Clone)]
struct Layout {
    w_in: Span,
    b_in: Span,
    w1: Span,
    b1: Span,
    w2: Span,
    b2: Span,
    w_out: Span,
    b_out: Span,
    total: usize,
}

/// Named tensors as persisted; weights are row-major `[out][tap][in]` for convolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedParams {
    pub w_in: Vec<f64>,
    pub b_in: Vec<f64>,
    pub conv1_w: Vec<f64>,
    pub conv1_b: Vec<f64>,
    pub conv2_w: Vec<f64>,
    pub conv2_b: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel {
    shape: ModelShape,
    params: Vec<f64>,
    pub seed: u64,
    pub train_config: Option<TrainConfig>,
    pub feature_spec: Option<FeatureSpec>,
}

impl PredictorModel {
    /// All-zero weights: predicts `output_bias` everywhere.
    pub fn zeros(shape: ModelShape, output_bias: f64) -> Result<Self, PredictorError> {
        shape.validate()?;
        let layout = shape.layout();
        let mut params = vec![0.0; layout.total];
        params[layout.b_out.start] = output_bias;
        Ok(Self {
            shape,
            params,
            seed: 0,
            train_config: None,
            feature_spec: None,
        })
    }

    /// Uniform `±sqrt(1/fan_in)` initialization from `seed`; the output bias starts at `output_bias`.
    pub fn init(shape: ModelShape, seed: u64, output_bias: f64) -> Result<Self, PredictorError> {
        let mut model = Self::zeros(shape, output_bias)?;
        model.seed = seed;
        let layout = shape.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, c, k) = (shape.input_dim, shape.channels, shape.kernel);
        let groups = [
            (layout.w_in.start..layout.b_in.end, d),
            (layout.w1.start..layout.b1.end, c * k),
            (layout.w2.start..layout.b2.end, c * k),
            (layout.w_out.clone(), c),
        ];
        for (span, fan_in) in groups {
            let bound = (1.0 / fan_in as f64).sqrt();
            for p in &mut model.params[span] {
                *p = rng.gen_range(-bound..=bound);
            }
        }
        Ok(model)
    }

    pub fn from_named(shape: ModelShape, named: &NamedParams) -> Result<Self, PredictorError> {
        let mut model = Self::zeros(shape, named.b_out)?;
        let layout = shape.layout();
        let parts: [(&Span, &[f64], &str); 7] = [
            (&layout.w_in, &named.w_in, "w_in"),
            (&layout.b_in, &named.b_in, "b_in"),
            (&layout.w1, &named.conv1_w, "conv1_w"),
            (&layout.b1, &named.conv1_b, "conv1_b"),
            (&layout.w2, &named.conv2_w, "conv2_w"),
            (&layout.b2, &named.conv2_b, "conv2_b"),
            (&layout.w_out, &named.w_out, "w_out"),
        ];
        for (span, values, name) in parts {
            if values.len() != span.len() {
                return Err(PredictorError::DimensionMismatch(format!(
                    "{name} has {} values, shape needs {}",
                    values.len(),
                    span.len()
                )));
            }
            model.params[span.clone()].copy_from_slice(values);
        }
        if !model.params.iter().all(|p| p.is_finite()) {
            return Err(PredictorError::DimensionMismatch(
                "non-finite weight".into(),
            ));
        }
        Ok(model)
    }

    pub fn to_named(&self) -> NamedParams {
        let l = self.shape.layout();
        let p = &self.params;
        NamedParams {
            w_in: p[l.w_in].to_vec(),
            b_in: p[l.b_in].to_vec(),
            conv1_w: p[l.w1].to_vec(),
            conv1_b: p[l.b1].to_vec(),
            conv2_w: p[l.w2].to_vec(),
            conv2_b: p[l.b2].to_vec(),
            w_out: p[l.w_out].to_vec(),
            b_out: p[l.b_out.start],
        }
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn output_bias(&self) -> f64 {
        self.params[self.params.len() - 1]
    }

    pub(crate) fn check_features(&self, features: &FrameFeatures) -> Result<(), PredictorError> {
        if features.dim() != self.shape.input_dim {
            return Err(PredictorError::DimensionMismatch(format!(
                "features have {} dims, model expects {}",
                features.dim(),
                self.shape.input_dim
            )));
        }
        Ok(())
    }

    /// Raw (unclamped) network output per frame.
    pub fn forward(&self, features: &FrameFeatures) -> Result<Vec<f64>, PredictorError> {
        self.check_features(features)?;
        Ok(self.run(features).output)
    }

    /// One log-Hz value per frame, clamped to the trajectory sanity bounds.
    pub fn predict(
        &self,
        features: &FrameFeatures,
        hop_s: f64,
    ) -> Result<LogF0Track, PredictorError> {
        let values = self
            .forward(features)?
            .into_iter()
            .map(|v| v.clamp(MIN_LOG_F0, MAX_LOG_F0))
            .collect();
        Ok(LogF0Track::from_values(hop_s, values)?)
    }

    pub(crate) fn run(&self, features: &FrameFeatures) -> Activations {
        let l = self.shape.layout();
        let (d, c) = (self.shape.input_dim, self.shape.channels);
        let t = features.n_frames();
        let p = &self.params;
        let x = features.as_slice();

        let mut h0 = vec![0.0; t * c];
        for (row, xin) in h0.chunks_exact_mut(c).zip(x.chunks_exact(d)) {
            for (o, h) in row.iter_mut().enumerate() {
                let w = &p[l.w_in.start + o * d..l.w_in.start + (o + 1) * d];
                *h = p[l.b_in.start + o] + dot(w, xin);
            }
        }
        let a1 = conv_tanh(
            &h0,
            t,
            c,
            self.shape.kernel,
            &p[l.w1.clone()],
            &p[l.b1.clone()],
        );
        let a2 = conv_tanh(
            &a1,
            t,
            c,
            self.shape.kernel,
            &p[l.w2.clone()],
            &p[l.b2.clone()],
        );
        let w_out = &p[l.w_out.clone()];
        let b_out = p[l.b_out.start];
        let output = a2
            .chunks_exact(c)
            .map(|row| b_out + dot(w_out, row))
            .collect();
        Activations { h0, a1, a2, output }
    }

    /// Accumulates parameter gradients into `grad` given dL/d(output) per frame.
    pub(crate) fn backward(
        &self,
        features: &FrameFeatures,
        acts: &Activations,
        d_out: &[f64],
        grad: &mut [f64],
    ) {
        let l = self.shape.layout();
        let (d, c, k) = (self.shape.input_dim, self.shape.channels, self.shape.kernel);
        let t = features.n_frames();
        let p = &self.params;

        // output head
        let w_out = &p[l.w_out.clone()];
        let mut dz2 = vec![0.0; t * c];
        for (ti, &g) in d_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad[l.b_out.start] += g;
            let a2 = &acts.a2[ti * c..(ti + 1) * c];
            for ch in 0..c {
                grad[l.w_out.start + ch] += g * a2[ch];
                dz2[ti * c + ch] = g * w_out[ch] * (1.0 - a2[ch] * a2[ch]);
            }
        }

        let (w2, rest) = split_grad(grad, &l.w2, &l.b2);
        let mut da1 = conv_backward(&acts.a1, &dz2, t, c, k, &p[l.w2.clone()], w2, rest);
        for (g, a) in da1.iter_mut().zip(&acts.a1) {
            *g *= 1.0 - a * a;
        }
        let (w1, rest) = split_grad(grad, &l.w1, &l.b1);
        let dh0 = conv_backward(&acts.h0, &da1, t, c, k, &p[l.w1.clone()], w1, rest);

        let x = features.as_slice();
        for ti in 0..t {
            let xin = &x[ti * d..(ti + 1) * d];
            for o in 0..c {
                let g = dh0[ti * c + o];
                if g == 0.0 {
                    continue;
                }
                grad[l.b_in.start + o] += g;
                let row = &mut grad[l.w_in.start + o * d..l.w_in.start + (o + 1) * d];
                for (gw, &xi) in row.iter_mut().zip(xin) {
                    *gw += g * xi;
                }
            }
        }
    }
}

pub(crate) struct Activations {
    h0: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    pub output: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn split_grad<'a>(grad: &'a mut [f64], w: &Span, b: &Span) -> (&'a mut [f64], &'a mut [f64]) {
    debug_assert_eq!(w.end, b.start);
    let (head, tail) = grad[w.start..b.end].split_at_mut(w.len());
    (head, tail)
}

/// `tanh(b[o] + sum_{tap, i} w[o][tap][i] * x[t + tap - k/2][i])` with zero padding.
fn conv_tanh(x: &[f64], t: usize, c: usize, k: usize, w: &[f64], b: &[f64]) -> Vec<f64> {
    let half = k / 2;
    let mut out = vec![0.0; t * c];
    for ti in 0..t {
        for o in 0..c {
            let mut acc = b[o];
            for tap in 0..k {
                let src = ti + tap;
                if src < half || src - half >= t {
                    continue;
                }
                let xin = &x[(src - half) * c..(src - half + 1) * c];
                let wrow = &w[(o * k + tap) * c..(o * k + tap + 1) * c];
                acc += dot(wrow, xin);
            }
            out[ti * c + o] = acc.tanh();
        }
    }
    out
}

/// Given dL/dz for a convolution's pre-activation, accumulates weight/bias grads and
/// returns dL/dx.
#[allow(clippy::too_many_arguments)]
fn conv_backward(
    x: &[f64],
    dz: &[f64],
    t: usize,
    c: usize,
    k: usize,
    w: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
) -> Vec<f64> {
    let half = k / 2;
    let mut dx = vec![0.0; t * c];
    for ti in 0..t {
        for o in 0..c {
            let g = dz[ti * c + o];
            if g == 0.0 {
                continue;
            }
            gb[o] += g;
            for tap in 0..k {
                let src = ti + tap;
                if src < half || src - half >= t {
                    continue;
                }
                let s = src - half;
                let base = (o * k + tap) * c;
                let xin = &x[s * c..(s + 1) * c];
                let wrow = &w[base..base + c];
                let dxr = &mut dx[s * c..(s + 1) * c];
                for i in 0..c {
                    gw[base + i] += g * xin[i];
                    dxr[i] += g * wrow[i];
                }
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(t: usize) -> FrameFeatures {
        let frames: Vec<(usize, f64)> = (0..t).map(|i| (i % 3, (i % 4) as f64 / 3.0)).collect();
        FrameFeatures::from_frames(3, 2, 1, &frames).unwrap()
    }

    fn shape() -> ModelShape {
        ModelShape {
            input_dim: 6,
            channels: 8,
            kernel: 5,
        }
    }

    #[test]
    fn zero_model_outputs_bias() {
        let model = PredictorModel::zeros(shape(), 5.1).unwrap();
        let out = model.forward(&features(12)).unwrap();
        assert!(out.iter().all(|&v| v == 5.1));
        assert_eq!(model.output_bias(), 5.1);
    }

    #[test]
    fn output_length_matches_frames() {
        let model = PredictorModel::init(shape(), 3, 5.0).unwrap();
        for t in [0, 1, 2, 7, 40] {
            assert_eq!(model.forward(&features(t)).unwrap().len(), t);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let model = PredictorModel::init(
            ModelShape {
                input_dim: 9,
                ..shape()
            },
            3,
            5.0,
        )
        .unwrap();
        assert!(matches!(
            model.forward(&features(4)),
            Err(PredictorError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = PredictorModel::init(shape(), 11, 5.0).unwrap();
        let b = PredictorModel::init(shape(), 11, 5.0).unwrap();
        let c = PredictorModel::init(shape(), 12, 5.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.params(), c.params());
        let l = shape().layout();
        let bound = (1.0 / (8.0 * 5.0f64)).sqrt();
        assert!(a.params()[l.w1].iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn named_round_trip() {
        let a = PredictorModel::init(shape(), 5, 4.7).unwrap();
        let b = PredictorModel::from_named(shape(), &a.to_named()).unwrap();
        assert_eq!(a.params(), b.params());
        let mut named = a.to_named();
        named.conv2_b.pop();
        assert!(PredictorModel::from_named(shape(), &named).is_err());
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(PredictorModel::zeros(
            ModelShape {
                kernel: 4,
                ..shape()
            },
            0.0
        )
        .is_err());
    }

    #[test]
    fn predict_clamps_to_sanity_bounds() {
        let model = PredictorModel::zeros(shape(), 100.0).unwrap();
        let track = model.predict(&features(3), 0.005).unwrap();
        assert!(track.values_log().iter().all(|&v| v == MAX_LOG_F0));
        assert!(track.voiced_mask().iter().all(|&m| m));
    }
}
