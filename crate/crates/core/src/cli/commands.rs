use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::report::{write_csv, write_json, Cell};
use super::{
    CompareArgs, DistArgs, ExtractArgs, PredictArgs, RescaleArgs, StatsArgs, SynthArgs, TrainArgs,
    TrajKind,
};
use crate::audio::load_wav;
use crate::corpus::{
    load_manifest, load_manifest_with_speakers, load_track, load_track_dir, save_track, track_path,
    Corpus, SpeakerRole, Track,
};
use crate::metrics::{build_distribution, compare, kld, reference_range, ComparisonReport};
use crate::pitch::{extract_f0, F0Track, PitchConfig};
use crate::predictor::{load_model, save_model, train, FeatureSpec, TrainOutcome, TrainingPair};
use crate::trajectory::{
    delta, gen_flat, gen_linear, gen_sine, interpolate, rescale_to_target, speaker_stats,
    LogF0Track, SpeakerStats,
};
use crate::{Error, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

fn open_corpus(manifest: &Path, speakers: Option<&PathBuf>) -> Result<Corpus> {
    let corpus = match speakers {
        Some(s) => load_manifest_with_speakers(manifest, s)?,
        None => load_manifest(manifest)?,
    };
    if corpus.utterances.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(corpus)
}

/// Interpolated view of any persisted track.
fn as_log(track: &Track) -> Result<LogF0Track> {
    Ok(match track {
        Track::F0(t) => interpolate(t)?,
        Track::Log(t) => t.clone(),
    })
}

/// Voiced frames of a track in linear Hz, as an F0 track.
fn as_f0(track: &Track) -> Result<F0Track> {
    Ok(match track {
        Track::F0(t) => t.clone(),
        Track::Log(t) => {
            let frames: Vec<Option<f64>> = t
                .values_log()
                .iter()
                .zip(t.voiced_mask())
                .map(|(v, &on)| on.then(|| v.exp()))
                .collect();
            F0Track::from_frames(t.hop_s(), &frames)?
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceSummary {
    pub id: String,
    pub speaker: String,
    pub n_frames: usize,
    pub voiced_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerSummary {
    pub role: SpeakerRole,
    pub voiced_frames: usize,
    pub stats: Option<SpeakerStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractSummary {
    pub pitch: PitchConfig,
    pub utterances: Vec<UtteranceSummary>,
    pub speakers: BTreeMap<String, SpeakerSummary>,
}

fn extract_one(path: &Path, cfg: &PitchConfig) -> Result<F0Track> {
    let clip = load_wav(path)?;
    Ok(extract_f0(&clip, cfg)?)
}

pub fn cmd_extract(args: &ExtractArgs) -> Result<ExtractSummary> {
    let cfg = args.pitch.config();
    let corpus = open_corpus(&args.manifest, args.speakers.as_ref())?;
    create_dir(&args.out)?;

    let mut by_speaker: BTreeMap<&str, Vec<F0Track>> = BTreeMap::new();
    let mut utterances = Vec::new();
    for utt in &corpus.utterances {
        let track = extract_one(&utt.audio_path, &cfg).map_err(|e| e.in_utterance(&utt.id))?;
        save_track(track_path(&args.out, &utt.id), &Track::F0(track.clone()))?;
        utterances.push(UtteranceSummary {
            id: utt.id.clone(),
            speaker: utt.speaker_id.clone(),
            n_frames: track.len(),
            voiced_frames: track.voiced_count(),
        });
        by_speaker.entry(&utt.speaker_id).or_default().push(track);
    }

    let speakers = by_speaker
        .into_iter()
        .map(|(spk, tracks)| {
            let voiced_frames = tracks.iter().map(F0Track::voiced_count).sum();
            let summary = SpeakerSummary {
                role: corpus.role(spk).expect("validated speaker"),
                voiced_frames,
                stats: speaker_stats(&tracks).ok(),
            };
            (spk.to_string(), summary)
        })
        .collect();
    let summary = ExtractSummary {
        pitch: cfg,
        utterances,
        speakers,
    };
    write_json(&args.out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub id: String,
    pub n_frames: usize,
    pub rmse_hz: f64,
    pub rmse_log: f64,
    pub correlation: f64,
}

/// Per-utterance rows followed by a `MEAN` row averaging over utterances.
pub fn cmd_compare(args: &CompareArgs) -> Result<Vec<CompareRow>> {
    let a = load_track_dir(&args.track_a_dir)?;
    let b = load_track_dir(&args.track_b_dir)?;
    let only_a: Vec<String> = a.keys().filter(|k| !b.contains_key(*k)).cloned().collect();
    let only_b: Vec<String> = b.keys().filter(|k| !a.contains_key(*k)).cloned().collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(Error::IdMismatch { only_a, only_b });
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no tracks in {}",
            args.track_a_dir.display()
        )));
    }

    let mut rows = Vec::with_capacity(a.len() + 1);
    for (id, ta) in &a {
        let report: Result<ComparisonReport> = (|| Ok(compare(&as_log(ta)?, &as_log(&b[id])?)?))();
        let r = report.map_err(|e| e.in_utterance(id))?;
        rows.push(CompareRow {
            id: id.clone(),
            n_frames: r.n_frames,
            rmse_hz: r.rmse_hz,
            rmse_log: r.rmse_log,
            correlation: r.correlation,
        });
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&CompareRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    rows.push(CompareRow {
        id: "MEAN".into(),
        n_frames: rows.iter().map(|r| r.n_frames).sum(),
        rmse_hz: mean(|r| r.rmse_hz),
        rmse_log: mean(|r| r.rmse_log),
        correlation: mean(|r| r.correlation),
    });

    create_dir(&args.out)?;
    let table: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                Cell::Text(r.id.clone()),
                Cell::Count(r.n_frames),
                Cell::Num(r.rmse_hz),
                Cell::Num(r.rmse_log),
                Cell::Num(r.correlation),
            ]
        })
        .collect();
    write_csv(
        &args.out.join("compare.csv"),
        &["id", "n_frames", "rmse_hz", "rmse_log", "correlation"],
        &table,
    )?;
    write_json(&args.out.join("compare.json"), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistRow {
    pub system: String,
    pub kld_f0: f64,
    pub kld_delta: f64,
}

/// Pooled interpolated log-F0 values and their per-track forward differences.
pub(crate) fn pooled_values(dir: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let tracks = load_track_dir(dir)?;
    if tracks.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no tracks in {}",
            dir.display()
        )));
    }
    let mut f0 = Vec::new();
    let mut deltas = Vec::new();
    for (id, track) in &tracks {
        let log = as_log(track).map_err(|e| e.in_utterance(id))?;
        f0.extend_from_slice(log.values_log());
        if log.len() >= 2 {
            deltas.extend(delta(&log)?.values);
        }
    }
    Ok((f0, deltas))
}

fn system_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

/// KL divergence of the target distributions against each system's, on bins fixed by the target.
pub fn cmd_dist(args: &DistArgs) -> Result<Vec<DistRow>> {
    if args.bins < 2 || !(args.epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need bins >= 2 and epsilon > 0 (got {}, {})",
            args.bins, args.epsilon
        )));
    }
    let (target_f0, target_delta) = pooled_values(&args.target_dir)?;
    let f0_range = reference_range(&target_f0)?;
    let delta_range = reference_range(&target_delta)?;
    let p_f0 = build_distribution(&target_f0, args.bins, f0_range, args.epsilon)?;
    let p_delta = build_distribution(&target_delta, args.bins, delta_range, args.epsilon)?;

    let mut rows = Vec::with_capacity(args.system_dirs.len());
    for dir in &args.system_dirs {
        let (f0, deltas) = pooled_values(dir)?;
        let q_f0 = build_distribution(&f0, args.bins, f0_range, args.epsilon)?;
        let q_delta = build_distribution(&deltas, args.bins, delta_range, args.epsilon)?;
        rows.push(DistRow {
            system: system_name(dir),
            kld_f0: kld(&p_f0, &q_f0)?,
            kld_delta: kld(&p_delta, &q_delta)?,
        });
    }

    create_dir(&args.out)?;
    let table: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                Cell::Text(r.system.clone()),
                Cell::Num(r.kld_f0),
                Cell::Num(r.kld_delta),
            ]
        })
        .collect();
    write_csv(
        &args.out.join("kld.csv"),
        &["system", "kld_f0", "kld_delta"],
        &table,
    )?;
    write_json(&args.out.join("kld.json"), &rows)?;
    Ok(rows)
}

pub fn cmd_synth_traj(args: &SynthArgs) -> Result<LogF0Track> {
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(v.ln())
        } else {
            Err(Error::InvalidArgument(format!(
                "{name} must be a positive frequency, got {v}"
            )))
        }
    };
    let track = match args.kind {
        TrajKind::Flat => gen_flat(
            args.n_frames,
            args.hop,
            positive("--level-hz", args.level_hz)?,
        )?,
        TrajKind::Sine => gen_sine(
            args.n_frames,
            args.hop,
            positive("--center-hz", args.center_hz)?,
            args.amplitude,
            args.period,
        )?,
        TrajKind::Linear => gen_linear(
            args.n_frames,
            args.hop,
            positive("--start-hz", args.start_hz)?,
            positive("--end-hz", args.end_hz)?,
        )?,
    };
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_track(&args.out, &Track::Log(track.clone()))?;
    Ok(track)
}

pub fn cmd_train(args: &TrainArgs, seed: u64) -> Result<TrainOutcome> {
    let pitch = args.pitch.config();
    let cfg = args.train_config(seed);
    cfg.validate()?;
    let corpus = open_corpus(&args.manifest, args.speakers.as_ref())?;
    let spec = FeatureSpec {
        hop_s: pitch.hop_s,
        phonemes: corpus.phoneme_inventory(),
        speakers: corpus.speaker_ids(),
    };

    let mut pairs = Vec::with_capacity(corpus.utterances.len());
    for utt in &corpus.utterances {
        let pair: Result<TrainingPair> = (|| {
            let oracle = match &args.tracks {
                Some(dir) => as_log(&load_track(track_path(dir, &utt.id))?)?,
                None => interpolate(&extract_one(&utt.audio_path, &pitch)?)?,
            };
            if oracle.hop_s() != spec.hop_s {
                return Err(Error::InvalidArgument(format!(
                    "track hop {} differs from --hop {}",
                    oracle.hop_s(),
                    spec.hop_s
                )));
            }
            let features = spec.featurize_to(utt, oracle.len())?;
            let is_target = corpus.role(&utt.speaker_id) == Some(SpeakerRole::Target);
            Ok(TrainingPair::new(features, oracle, is_target)?)
        })();
        pairs.push(pair.map_err(|e| e.in_utterance(&utt.id))?);
    }

    let mut outcome = train(&pairs, &cfg)?;
    outcome.model.feature_spec = Some(spec);
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_model(&args.out, &outcome.model)?;

    let loss_path = args
        .loss_out
        .clone()
        .unwrap_or_else(|| args.out.with_extension("loss.csv"));
    let rows: Vec<Vec<Cell>> = outcome
        .losses
        .iter()
        .map(|l| vec![Cell::Count(l.step), Cell::Num(l.loss)])
        .collect();
    write_csv(&loss_path, &["step", "loss"], &rows)?;
    Ok(outcome)
}

pub fn cmd_predict(args: &PredictArgs) -> Result<usize> {
    let model = load_model(&args.model)?;
    let spec = model
        .feature_spec
        .clone()
        .ok_or_else(|| Error::InvalidArgument("model file carries no feature spec".into()))?;
    let corpus = open_corpus(&args.manifest, args.speakers.as_ref())?;
    create_dir(&args.out)?;
    for utt in &corpus.utterances {
        let track: Result<LogF0Track> = (|| {
            let features = spec.featurize(utt)?;
            Ok(model.predict(&features, spec.hop_s)?)
        })();
        let track = track.map_err(|e| e.in_utterance(&utt.id))?;
        save_track(track_path(&args.out, &utt.id), &Track::Log(track))?;
    }
    Ok(corpus.utterances.len())
}

fn read_stats(path: &Path) -> Result<SpeakerStats> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let stats: SpeakerStats = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    if !(stats.mean_hz > 0.0 && stats.mean_hz.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "{}: mean_hz must be positive",
            path.display()
        )));
    }
    Ok(stats)
}

pub fn cmd_rescale(args: &RescaleArgs) -> Result<usize> {
    let source = read_stats(&args.source_stats)?;
    let target = read_stats(&args.target_stats)?;
    let tracks = load_track_dir(&args.track_dir)?;
    create_dir(&args.out)?;
    for (id, track) in &tracks {
        let rescaled: Result<LogF0Track> =
            (|| Ok(rescale_to_target(&as_log(track)?, &source, &target)?))();
        let rescaled = rescaled.map_err(|e| e.in_utterance(id))?;
        save_track(track_path(&args.out, id), &Track::Log(rescaled))?;
    }
    Ok(tracks.len())
}

pub fn cmd_stats(args: &StatsArgs) -> Result<SpeakerStats> {
    let tracks = load_track_dir(&args.track_dir)?;
    let keep: Option<Vec<String>> = match (&args.manifest, &args.speaker) {
        (Some(manifest), Some(speaker)) => {
            let corpus = open_corpus(manifest, args.speakers.as_ref())?;
            Some(
                corpus
                    .utterances
                    .iter()
                    .filter(|u| &u.speaker_id == speaker)
                    .map(|u| u.id.clone())
                    .collect(),
            )
        }
        _ => None,
    };
    let mut selected = Vec::new();
    for (id, track) in &tracks {
        if keep.as_ref().is_none_or(|k| k.contains(id)) {
            selected.push(as_f0(track)?);
        }
    }
    let stats = speaker_stats(&selected)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_json(&args.out, &stats)?;
    Ok(stats)
}
