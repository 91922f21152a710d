//! Batch drivers behind the command-line tools. Each works either on a
//! manifest (files on disk) or on in-memory labelled utterances.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::audio::{difference, load_wav, measure_snr, mix_noise, write_wav, AudioSignal, SnrSpec};
use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureMatrix, FeatureParams};
use crate::models::{em_train, CdhmmModel, TrainOptions};
use crate::recognition::{calibrate_threshold, identify, verify, ModelFile, SpeakerDatabase, VerificationProfile};

use super::manifest::{DatasetManifest, Split};
use super::report::{condition_name, EvalConfig, ExperimentReport, IdentCondition, IdentTrial, VerifCondition, VerifTrial};

/// Folds used to calibrate a threshold when no calibration split exists.
pub const CALIBRATION_FOLDS: usize = 4;

/// One utterance with its speaker label and a display name.
#[derive(Debug, Clone)]
pub struct Labelled<T> {
    pub speaker: String,
    pub name: String,
    pub item: T,
}

/// Feature file for an audio file: the relative path with its extension
/// replaced by `<kind>.bin`, under `out_dir`.
pub fn feature_path(out_dir: &Path, rel_path: &Path, kind: FeatureKind) -> PathBuf {
    out_dir.join(rel_path.with_extension(format!("{}.bin", kind.as_str())))
}

pub fn model_path(dir: &Path, speaker: &str) -> PathBuf {
    dir.join(format!("{speaker}.model.json"))
}

#[derive(Debug, Clone, Default)]
pub struct ExtractSummary {
    pub written: Vec<PathBuf>,
    pub failures: Vec<(PathBuf, String)>,
}

/// Extracts features for `(source, relative path)` pairs into `out_dir`.
/// Unreadable inputs are recorded in `failures`; fails only when nothing
/// could be processed.
pub fn extract_files(inputs: &[(PathBuf, PathBuf)], out_dir: &Path, params: &FeatureParams) -> Result<ExtractSummary> {
    let kind = params.kind();
    let results: Vec<(PathBuf, Result<PathBuf>)> = inputs
        .par_iter()
        .map(|(src, rel)| {
            let r = (|| {
                let audio = load_wav(src)?;
                let feats = crate::extract_features(&audio, params)?;
                let dst = feature_path(out_dir, rel, kind);
                if let Some(parent) = dst.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                feats.save(&dst)?;
                Ok(dst)
            })();
            (src.clone(), r)
        })
        .collect();
    let mut summary = ExtractSummary::default();
    for (src, r) in results {
        match r {
            Ok(p) => summary.written.push(p),
            Err(e) => summary.failures.push((src, e.to_string())),
        }
    }
    if summary.written.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no valid inputs ({} failed)",
            summary.failures.len()
        )));
    }
    Ok(summary)
}

pub fn extract_manifest(manifest: &DatasetManifest, out_dir: &Path, params: &FeatureParams) -> Result<ExtractSummary> {
    let inputs: Vec<(PathBuf, PathBuf)> = manifest
        .entries
        .iter()
        .map(|u| (u.path.clone(), u.rel_path.clone()))
        .collect();
    extract_files(&inputs, out_dir, params)
}

/// Loads previously extracted features of one split, grouped by speaker.
pub fn load_split_features(
    manifest: &DatasetManifest,
    feature_dir: &Path,
    kind: FeatureKind,
    split: Split,
) -> Result<BTreeMap<String, Vec<FeatureMatrix>>> {
    let mut out: BTreeMap<String, Vec<FeatureMatrix>> = BTreeMap::new();
    for u in manifest.by_split(split) {
        let path = feature_path(feature_dir, &u.rel_path, kind);
        let fm = FeatureMatrix::load(&path)?;
        out.entry(u.speaker.clone()).or_default().push(fm);
    }
    Ok(out)
}

/// Loads the audio of one split of a manifest.
pub fn load_split_audio(manifest: &DatasetManifest, split: Split) -> Result<Vec<Labelled<AudioSignal>>> {
    let utts: Vec<_> = manifest.by_split(split).collect();
    utts.par_iter()
        .map(|u| {
            Ok(Labelled {
                speaker: u.speaker.clone(),
                name: u.rel_path.display().to_string(),
                item: load_wav(&u.path)?,
            })
        })
        .collect()
}

/// Per-speaker seed: mixes the top-level seed with a hash of the id, so a
/// speaker's model does not depend on which other speakers are present.
pub fn speaker_seed(seed: u64, speaker: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in speaker.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    seed ^ h
}

fn speaker_opts(opts: &TrainOptions, speaker: &str, salt: u64) -> TrainOptions {
    TrainOptions {
        seed: speaker_seed(opts.seed, speaker).wrapping_add(salt),
        ..opts.clone()
    }
}

/// Trains one model per speaker, in parallel.
pub fn train_speakers(
    train: &BTreeMap<String, Vec<FeatureMatrix>>,
    n_states: usize,
    n_mixtures: usize,
    opts: &TrainOptions,
) -> Result<BTreeMap<String, CdhmmModel>> {
    let jobs: Vec<(&String, &Vec<FeatureMatrix>)> = train.iter().collect();
    jobs.par_iter()
        .map(|(id, seqs)| {
            let model = em_train(seqs, n_states, n_mixtures, &speaker_opts(opts, id, 0))
                .map_err(|e| Error::InsufficientData(format!("speaker {id}: {e}")))?;
            Ok(((*id).clone(), model))
        })
        .collect()
}

pub fn save_models(dir: &Path, models: &[ModelFile]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    models
        .iter()
        .map(|m| {
            let p = model_path(dir, &m.speaker_id);
            m.save(&p)?;
            Ok(p)
        })
        .collect()
}

/// Loads `<dir>/<speaker>.model.json` for every listed speaker.
pub fn load_models(dir: &Path, speakers: &[String]) -> Result<Vec<ModelFile>> {
    speakers
        .iter()
        .map(|s| {
            let p = model_path(dir, s);
            if !p.exists() {
                return Err(Error::InsufficientData(format!("missing model for speaker {s}: {}", p.display())));
            }
            let m = ModelFile::load(&p)?;
            if m.speaker_id != *s {
                return Err(Error::Format(format!("{} holds speaker {}", p.display(), m.speaker_id)));
            }
            Ok(m)
        })
        .collect()
}

pub fn database(models: &[ModelFile]) -> Result<SpeakerDatabase> {
    let mut db = SpeakerDatabase::new();
    for m in models {
        db.insert(m.speaker_id.clone(), m.model.clone())?;
    }
    Ok(db)
}

/// Settings shared by every model in the database.
pub fn common_params(db: &SpeakerDatabase) -> Result<(FeatureParams, u32)> {
    let mut it = db.iter();
    let (_, first) = it.next().ok_or(Error::EmptyDatabase)?;
    for (id, m) in it {
        if m.feature_params != first.feature_params || m.sample_rate != first.sample_rate {
            return Err(Error::Format(format!("model {id} uses different feature settings")));
        }
    }
    Ok((first.feature_params.clone(), first.sample_rate))
}

/// Test audio for one condition: clean, or mixed with `noise` at `snr_db`.
fn condition_features(
    tests: &[Labelled<AudioSignal>],
    params: &FeatureParams,
    noise: Option<&AudioSignal>,
    snr_db: Option<f64>,
) -> Result<Vec<Labelled<FeatureMatrix>>> {
    tests
        .par_iter()
        .map(|t| {
            let audio = match (noise, snr_db) {
                (Some(n), Some(s)) => mix_noise(&t.item, n, SnrSpec::new(s)?)?,
                _ => t.item.clone(),
            };
            Ok(Labelled {
                speaker: t.speaker.clone(),
                name: t.name.clone(),
                item: crate::extract_features(&audio, params)?,
            })
        })
        .collect()
}

fn conditions(noise: Option<&AudioSignal>, snrs: &[f64]) -> Vec<Option<f64>> {
    let mut c = vec![None];
    if noise.is_some() {
        c.extend(snrs.iter().map(|&s| Some(s)));
    }
    c
}

pub fn identify_trials(tests: &[Labelled<FeatureMatrix>], db: &SpeakerDatabase) -> Result<Vec<IdentTrial>> {
    tests
        .iter()
        .map(|t| {
            let id = identify(&t.item, db)?;
            let score = id.scores.iter().find(|(s, _)| *s == id.speaker_id).map_or(f64::NAN, |s| s.1);
            Ok(IdentTrial {
                correct: id.speaker_id == t.speaker,
                speaker: t.speaker.clone(),
                utterance: t.name.clone(),
                predicted: id.speaker_id,
                score,
            })
        })
        .collect()
}

/// Closed-set identification of every test utterance, clean and at each
/// SNR when a noise signal is given.
pub fn identify_eval(
    tests: &[Labelled<AudioSignal>],
    db: &SpeakerDatabase,
    noise: Option<&AudioSignal>,
    snrs: &[f64],
    config: &EvalConfig,
) -> Result<ExperimentReport> {
    let (params, _) = common_params(db)?;
    if tests.is_empty() {
        return Err(Error::InsufficientData("no test utterances".into()));
    }
    for t in tests {
        if db.get(&t.speaker).is_none() {
            return Err(Error::InsufficientData(format!("no model for speaker {}", t.speaker)));
        }
    }
    let mut report = ExperimentReport::new(config.clone(), db.len());
    for snr in conditions(noise, snrs) {
        let feats = condition_features(tests, &params, noise, snr)?;
        let trials = identify_trials(&feats, db)?;
        report
            .identification
            .push(IdentCondition::from_trials(condition_name(snr), snr, trials));
    }
    Ok(report)
}

/// Threshold for one speaker. Uses `calib` when given, otherwise
/// `CALIBRATION_FOLDS`-fold cross-validation over the training utterances
/// (each held-out fold scored by a model trained on the remaining folds).
pub fn calibrate_speaker(
    speaker: &str,
    model: &CdhmmModel,
    train: &[FeatureMatrix],
    calib: Option<&[FeatureMatrix]>,
    opts: &TrainOptions,
    alpha: f64,
) -> Result<VerificationProfile> {
    if let Some(c) = calib.filter(|c| !c.is_empty()) {
        return calibrate_threshold(model, c, alpha);
    }
    let folds = CALIBRATION_FOLDS.min(train.len());
    if folds < 2 {
        return Err(Error::InsufficientData(format!(
            "speaker {speaker}: need a calibration split or at least 2 training utterances"
        )));
    }
    let fold_scores: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let fit: Vec<FeatureMatrix> = train.iter().enumerate().filter(|(i, _)| i % folds != f).map(|(_, x)| x.clone()).collect();
            let sub = em_train(&fit, model.n_states, model.n_mixtures, &speaker_opts(opts, speaker, f as u64 + 1))?;
            train
                .iter()
                .enumerate()
                .filter(|(i, _)| i % folds == f)
                .map(|(_, x)| crate::models::log_likelihood(&sub, x).map(|s| s.per_frame))
                .collect()
        })
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = fold_scores.into_iter().flatten().collect();
    let (threshold, calibration) = crate::recognition::threshold_from_scores(&scores, alpha)?;
    Ok(VerificationProfile {
        model: model.clone(),
        threshold,
        alpha,
        calibration,
    })
}

/// Every profile scored against every test utterance: same-speaker pairs
/// are genuine trials, the rest impostor trials. `impostors` holds extra
/// utterances from speakers without a profile.
pub fn verify_eval(
    profiles: &BTreeMap<String, VerificationProfile>,
    tests: &[Labelled<AudioSignal>],
    impostors: &[Labelled<AudioSignal>],
    noise: Option<&AudioSignal>,
    snrs: &[f64],
    config: &EvalConfig,
) -> Result<ExperimentReport> {
    let first = profiles.values().next().ok_or(Error::EmptyDatabase)?;
    let params = first.model.feature_params.clone();
    if profiles.values().any(|p| p.model.feature_params != params) {
        return Err(Error::Format("profiles use different feature settings".into()));
    }
    let all: Vec<Labelled<AudioSignal>> = tests.iter().chain(impostors).cloned().collect();
    if all.is_empty() {
        return Err(Error::InsufficientData("no verification trials".into()));
    }
    let mut report = ExperimentReport::new(config.clone(), profiles.len());
    for snr in conditions(noise, snrs) {
        let feats = condition_features(&all, &params, noise, snr)?;
        let mut trials = Vec::new();
        for (claimed, profile) in profiles {
            for t in &feats {
                let v = verify(&t.item, profile)?;
                trials.push(VerifTrial {
                    claimed: claimed.clone(),
                    actual: t.speaker.clone(),
                    utterance: t.name.clone(),
                    score: v.score,
                    threshold: profile.threshold,
                    accepted: v.accepted,
                });
            }
        }
        report
            .verification
            .push(VerifCondition::from_trials(condition_name(snr), snr, trials));
    }
    Ok(report)
}

/// Output name for a mixed file: `<stem>_snr<value>dB.wav` next to the
/// relative path's parent under `out_dir`.
pub fn mixed_path(out_dir: &Path, rel_path: &Path, snr_db: f64) -> PathBuf {
    let stem = rel_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = format!("{stem}_snr{snr_db}dB.wav");
    match rel_path.parent() {
        Some(p) => out_dir.join(p).join(name),
        None => out_dir.join(name),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedFile {
    pub path: PathBuf,
    pub target_snr_db: f64,
    /// SNR of the floating-point mix, before 16-bit quantization.
    pub measured_snr_db: f64,
    pub clipped_samples: usize,
}

/// Writes one noisy copy of every input per SNR. An empty SNR list writes
/// nothing and succeeds.
pub fn mix_files(inputs: &[(PathBuf, PathBuf)], noise: &AudioSignal, snrs: &[f64], out_dir: &Path) -> Result<Vec<MixedFile>> {
    let specs: Vec<SnrSpec> = snrs.iter().map(|&s| SnrSpec::new(s)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (src, rel) in inputs {
        let clean = load_wav(src)?;
        for spec in &specs {
            let mixed = mix_noise(&clean, noise, *spec)?;
            let measured = measure_snr(&clean, &difference(&mixed, &clean)?)?;
            let path = mixed_path(out_dir, rel, spec.target_snr_db);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            let clipped = write_wav(&path, &mixed)?;
            out.push(MixedFile {
                path,
                target_snr_db: spec.target_snr_db,
                measured_snr_db: measured,
                clipped_samples: clipped,
            });
        }
    }
    Ok(out)
}
