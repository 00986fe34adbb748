//! Objective F0 metrics: RMSE, Pearson correlation, smoothed histograms and KL divergence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::LogF0Track;

pub const DEFAULT_BINS: usize = 50;
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("hop mismatch: {0} s vs {1} s")]
    HopMismatch(f64, f64),
    #[error("need at least {need} frames, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("no values to build a distribution from")]
    EmptyInput,
    #[error("bad histogram range: {0}")]
    BadRange(String),
    #[error("distributions have different bin edges")]
    BinMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rmse_hz: f64,
    pub rmse_log: f64,
    pub correlation: f64,
    pub n_frames: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rmse {
    pub hz: f64,
    pub log: f64,
}

fn check_pair(a: &LogF0Track, b: &LogF0Track, min_len: usize) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.hop_s() != b.hop_s() {
        return Err(MetricsError::HopMismatch(a.hop_s(), b.hop_s()));
    }
    if a.len() < min_len {
        return Err(MetricsError::TooShort {
            need: min_len,
            got: a.len(),
        });
    }
    Ok(())
}

fn rms_diff(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = a.zip(b).fold((0.0, 0usize), |(s, n), (x, y)| {
        (s + (x - y) * (x - y), n + 1)
    });
    (sum / n as f64).sqrt()
}

/// RMSE over log values and over the same frames exponentiated to Hz.
pub fn rmse(a: &LogF0Track, b: &LogF0Track) -> Result<Rmse, MetricsError> {
    check_pair(a, b, 1)?;
    let (av, bv) = (a.values_log(), b.values_log());
    Ok(Rmse {
        log: rms_diff(av.iter().copied(), bv.iter().copied()),
        hz: rms_diff(av.iter().map(|v| v.exp()), bv.iter().map(|v| v.exp())),
    })
}

/// Pearson correlation of the log values. A zero-variance series correlates at 0.
pub fn pearson(a: &LogF0Track, b: &LogF0Track) -> Result<f64, MetricsError> {
    check_pair(a, b, 2)?;
    Ok(pearson_slices(a.values_log(), b.values_log()))
}

pub(crate) fn pearson_slices(a: &[f64], b: &[f64]) -> f64 {
    // the summed mean of a constant series can be off by an ulp, so test constancy directly
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if a.is_empty() || constant(a) || constant(b) {
        return 0.0;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

pub fn compare(a: &LogF0Track, b: &LogF0Track) -> Result<ComparisonReport, MetricsError> {
    let err = rmse(a, b)?;
    let correlation = if a.len() >= 2 { pearson(a, b)? } else { 0.0 };
    Ok(ComparisonReport {
        rmse_hz: err.hz,
        rmse_log: err.log,
        correlation,
        n_frames: a.len(),
    })
}

/// Histogram-derived probability distribution with additive smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F0Distribution {
    bin_edges: Vec<f64>,
    probs: Vec<f64>,
    epsilon: f64,
}

impl F0Distribution {
    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// `bins` uniform half-open bins over `[lo, hi]`; out-of-range values land in the edge bins.
pub fn build_distribution(
    values: &[f64],
    bins: usize,
    range: (f64, f64),
    epsilon: f64,
) -> Result<F0Distribution, MetricsError> {
    let (lo, hi) = range;
    if bins < 2 {
        return Err(MetricsError::BadRange(format!(
            "need at least 2 bins, got {bins}"
        )));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(MetricsError::BadRange(format!("[{lo}, {hi}]")));
    }
    if !(epsilon > 0.0) {
        return Err(MetricsError::BadRange(format!(
            "epsilon {epsilon} must be positive"
        )));
    }
    if values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }

    let width = (hi - lo) / bins as f64;
    let bin_edges: Vec<f64> = (0..=bins)
        .map(|k| if k == bins { hi } else { lo + k as f64 * width })
        .collect();

    let mut counts = vec![0.0; bins];
    for &v in values {
        counts[bin_index(&bin_edges, v)] += 1.0;
    }
    let total: f64 = values.len() as f64 + epsilon * bins as f64;
    let probs = counts.iter().map(|c| (c + epsilon) / total).collect();
    Ok(F0Distribution {
        bin_edges,
        probs,
        epsilon,
    })
}

fn bin_index(edges: &[f64], v: f64) -> usize {
    let bins = edges.len() - 1;
    // first edge strictly above v, minus one: bins are [e_k, e_{k+1})
    let k = edges.partition_point(|&e| e <= v);
    k.saturating_sub(1).min(bins - 1)
}

/// Range for shared bin edges: `[min, max]` of the reference sample, widened when degenerate.
pub fn reference_range(values: &[f64]) -> Result<(f64, f64), MetricsError> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(MetricsError::BadRange("non-finite reference values".into()));
    }
    if lo < hi {
        Ok((lo, hi))
    } else {
        let pad = (lo.abs() * 1e-3).max(1e-3);
        Ok((lo - pad, hi + pad))
    }
}

/// Kullback-Leibler divergence D(p || q) in nats.
pub fn kld(p: &F0Distribution, q: &F0Distribution) -> Result<f64, MetricsError> {
    if p.bin_edges != q.bin_edges {
        return Err(MetricsError::BinMismatch);
    }
    Ok(p.probs
        .iter()
        .zip(&q.probs)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum())
}
