//! Closed-set speaker identification and threshold-based verification.
//!
//! All decisions use the per-frame average log-likelihood so utterances of
//! different lengths are comparable.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureMatrix};
use crate::models::{log_likelihood, CdhmmModel, TrainOptions};

pub const DEFAULT_ALPHA: f64 = 2.0;

/// Trained models keyed by speaker id.
#[derive(Debug, Clone, Default)]
pub struct SpeakerDatabase {
    entries: BTreeMap<String, CdhmmModel>,
}

impl SpeakerDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a model; all models must share feature kind and dimension.
    pub fn insert(&mut self, speaker_id: impl Into<String>, model: CdhmmModel) -> Result<()> {
        if let Some(existing) = self.entries.values().next() {
            if existing.feature_params.kind() != model.feature_params.kind() {
                return Err(Error::FeatureMismatch {
                    expected: existing.feature_params.kind().to_string(),
                    actual: model.feature_params.kind().to_string(),
                });
            }
            if existing.feature_dim != model.feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: existing.feature_dim,
                    actual: model.feature_dim,
                });
            }
        }
        self.entries.insert(speaker_id.into(), model);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn feature_kind(&self) -> Option<FeatureKind> {
        self.entries.values().next().map(|m| m.feature_params.kind())
    }

    pub fn get(&self, speaker_id: &str) -> Option<&CdhmmModel> {
        self.entries.get(speaker_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &CdhmmModel)> {
        self.entries.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub speaker_id: String,
    /// Per-frame average log-likelihood of every model, ordered by speaker id.
    pub scores: Vec<(String, f64)>,
}

/// Index of the highest score; ties go to the earliest entry.
pub fn argmax(scores: &[(String, f64)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (_, s)) in scores.iter().enumerate() {
        match best {
            Some(b) if scores[b].1 >= *s => {}
            _ => best = Some(i),
        }
    }
    best
}

pub fn identify(test: &FeatureMatrix, db: &SpeakerDatabase) -> Result<Identification> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    let entries: Vec<(&String, &CdhmmModel)> = db.iter().collect();
    let scores: Vec<(String, f64)> = entries
        .par_iter()
        .map(|(id, model)| Ok(((*id).clone(), log_likelihood(model, test)?.per_frame)))
        .collect::<Result<_>>()?;
    let best = argmax(&scores).expect("non-empty database");
    Ok(Identification {
        speaker_id: scores[best].0.clone(),
        scores,
    })
}

/// Summary of the held-out true-speaker scores behind a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStats {
    pub n_samples: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationProfile {
    pub model: CdhmmModel,
    pub threshold: f64,
    pub alpha: f64,
    pub calibration: CalibrationStats,
}

/// `threshold = mean - alpha * std` of the given held-out scores.
pub fn threshold_from_scores(scores: &[f64], alpha: f64) -> Result<(f64, CalibrationStats)> {
    if scores.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} calibration samples (need at least 2)",
            scores.len()
        )));
    }
    if !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be finite, got {alpha}")));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let std = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let threshold = mean - alpha * std;
    if !threshold.is_finite() {
        return Err(Error::NonFinite("threshold calibration"));
    }
    Ok((
        threshold,
        CalibrationStats {
            n_samples: scores.len(),
            mean,
            std,
            min,
        },
    ))
}

pub fn calibrate_threshold(
    model: &CdhmmModel,
    held_out: &[FeatureMatrix],
    alpha: f64,
) -> Result<VerificationProfile> {
    let scores: Vec<f64> = held_out
        .iter()
        .map(|f| log_likelihood(model, f).map(|s| s.per_frame))
        .collect::<Result<_>>()?;
    let (threshold, calibration) = threshold_from_scores(&scores, alpha)?;
    Ok(VerificationProfile {
        model: model.clone(),
        threshold,
        alpha,
        calibration,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub accepted: bool,
    pub score: f64,
}

/// Accepts iff the per-frame score is at least the threshold.
pub fn verify(test: &FeatureMatrix, profile: &VerificationProfile) -> Result<Verification> {
    let score = log_likelihood(&profile.model, test)?.per_frame;
    Ok(Verification {
        accepted: decide(score, profile.threshold),
        score,
    })
}

pub fn decide(score: f64, threshold: f64) -> bool {
    score >= threshold
}

const MODEL_FORMAT: &str = "wpmfc-model";
const MODEL_VERSION: u32 = 1;

/// Threshold section stored next to a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationSection {
    pub threshold: f64,
    pub alpha: f64,
    pub calibration: CalibrationStats,
}

/// On-disk speaker model: JSON with the full model (including feature
/// extraction settings) and an optional verification section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub speaker_id: String,
    pub model: CdhmmModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationSection>,
    /// Training options, with the top-level seed, that produced the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainOptions>,
}

impl ModelFile {
    pub fn new(speaker_id: impl Into<String>, model: CdhmmModel) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            speaker_id: speaker_id.into(),
            model,
            verification: None,
            training: None,
        }
    }

    pub fn with_training(mut self, opts: &TrainOptions) -> Self {
        self.training = Some(opts.clone());
        self
    }

    pub fn with_profile(mut self, profile: &VerificationProfile) -> Self {
        self.verification = Some(VerificationSection {
            threshold: profile.threshold,
            alpha: profile.alpha,
            calibration: profile.calibration.clone(),
        });
        self
    }

    pub fn profile(&self) -> Option<VerificationProfile> {
        self.verification.as_ref().map(|v| VerificationProfile {
            model: self.model.clone(),
            threshold: v.threshold,
            alpha: v.alpha,
            calibration: v.calibration.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "unsupported model file {} v{}",
                file.format, file.version
            )));
        }
        file.model.validate()?;
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureParams;
    use crate::models::GaussianComponent;

    fn gmm(mean: f64) -> CdhmmModel {
        CdhmmModel::gmm(
            vec![GaussianComponent {
                weight: 1.0,
                mean: vec![mean],
                variance: vec![1.0],
            }],
            FeatureParams::Generic,
            0,
        )
        .unwrap()
    }

    fn feats(v: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_rows(&v.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn single_speaker_always_wins() {
        let mut db = SpeakerDatabase::new();
        db.insert("only", gmm(0.0)).unwrap();
        for x in [-50.0, 0.0, 50.0] {
            assert_eq!(identify(&feats(&[x]), &db).unwrap().speaker_id, "only");
        }
        assert!(matches!(identify(&feats(&[0.0]), &SpeakerDatabase::new()), Err(Error::EmptyDatabase)));
    }

    #[test]
    fn picks_best_and_breaks_ties_lexicographically() {
        let mut db = SpeakerDatabase::new();
        db.insert("b", gmm(1.0)).unwrap();
        db.insert("a", gmm(-1.0)).unwrap();
        db.insert("c", gmm(5.0)).unwrap();
        let r = identify(&feats(&[0.0, 0.0]), &db).unwrap();
        assert_eq!(r.speaker_id, "a");
        let ids: Vec<&str> = r.scores.iter().map(|(s, _)| s.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert!(r.scores.iter().all(|(_, s)| *s <= r.scores[0].1));
        let r = identify(&feats(&[4.0]), &db).unwrap();
        assert_eq!(r.speaker_id, "c");
    }

    #[test]
    fn argmax_is_shift_invariant() {
        let scores = vec![("a".to_string(), -3.0), ("b".to_string(), -1.5), ("c".to_string(), -1.5)];
        let best = argmax(&scores).unwrap();
        assert_eq!(best, 1);
        for shift in [-100.0, 0.25, 1e6] {
            let shifted: Vec<_> = scores.iter().map(|(k, s)| (k.clone(), s + shift)).collect();
            assert_eq!(argmax(&shifted), Some(best));
        }
        assert_eq!(argmax(&[]), None);
    }

    #[test]
    fn mixed_kinds_are_rejected() {
        let mut db = SpeakerDatabase::new();
        db.insert("a", gmm(0.0)).unwrap();
        let mut other = gmm(0.0);
        other.feature_params = FeatureParams::default_for(FeatureKind::Mfcc);
        assert!(db.insert("b", other).is_err());
    }

    #[test]
    fn threshold_examples() {
        let (t, stats) = threshold_from_scores(&[-40.0, -42.0], 2.0).unwrap();
        assert!((t + 43.0).abs() < 1e-12);
        assert_eq!((stats.mean, stats.std, stats.min, stats.n_samples), (-41.0, 1.0, -42.0, 2));
        let (t, _) = threshold_from_scores(&[-40.0, -42.0], 0.0).unwrap();
        assert_eq!(t, -41.0);
        assert!(threshold_from_scores(&[-40.0], 2.0).is_err());
    }

    #[test]
    fn boundary_is_inclusive_and_monotone() {
        assert!(decide(-43.0, -43.0));
        assert!(!decide(-43.0 - 1e-12, -43.0));
        let scores = [-50.0, -43.0, -42.9, -10.0];
        let thresholds = [-60.0, -45.0, -43.0, -42.95, -20.0, 0.0];
        for s in scores {
            for w in thresholds.windows(2) {
                assert!(decide(s, w[1]) <= decide(s, w[0]));
            }
        }
    }

    #[test]
    fn calibration_closed_loop() {
        let model = gmm(0.0);
        let held: Vec<FeatureMatrix> = [0.1, -0.3, 0.5, 0.0].iter().map(|&x| feats(&[x, -x])).collect();
        let profile = calibrate_threshold(&model, &held, 2.0).unwrap();
        for f in &held {
            assert!(verify(f, &profile).unwrap().accepted);
        }
        assert!(!verify(&feats(&[8.0]), &profile).unwrap().accepted);
        assert!(calibrate_threshold(&model, &held[..1], 2.0).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let model = gmm(0.123456789012345);
        let profile = calibrate_threshold(&model, &[feats(&[0.0]), feats(&[1.0])], 2.0).unwrap();
        let file = ModelFile::new("spk", model).with_profile(&profile);
        let back = ModelFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.profile().unwrap(), profile);
        let bad = file.to_json().replace("wpmfc-model", "other");
        assert!(ModelFile::from_json(&bad).is_err());
    }
}
