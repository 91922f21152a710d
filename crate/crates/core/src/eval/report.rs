use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureParams;
use crate::models::TrainOptions;

/// Everything that determines an experiment's outcome besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub feature: FeatureParams,
    pub n_states: usize,
    pub n_mixtures: usize,
    pub train: TrainOptions,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentTrial {
    pub speaker: String,
    pub utterance: String,
    pub predicted: String,
    pub correct: bool,
    /// Per-frame score of the predicted speaker.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentCondition {
    /// `clean` or `snr<value>dB`.
    pub condition: String,
    pub snr_db: Option<f64>,
    pub correct: usize,
    pub total: usize,
    pub accuracy_pct: f64,
    pub trials: Vec<IdentTrial>,
}

impl IdentCondition {
    pub fn from_trials(condition: String, snr_db: Option<f64>, trials: Vec<IdentTrial>) -> Self {
        let correct = trials.iter().filter(|t| t.correct).count();
        let total = trials.len();
        Self {
            condition,
            snr_db,
            correct,
            total,
            accuracy_pct: percent(correct, total),
            trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifTrial {
    pub claimed: String,
    pub actual: String,
    pub utterance: String,
    pub score: f64,
    pub threshold: f64,
    pub accepted: bool,
}

impl VerifTrial {
    pub fn is_genuine(&self) -> bool {
        self.claimed == self.actual
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifCondition {
    pub condition: String,
    pub snr_db: Option<f64>,
    pub genuine_trials: usize,
    pub genuine_accepted: usize,
    pub impostor_trials: usize,
    pub impostor_accepted: usize,
    pub true_accept_pct: f64,
    pub false_accept_pct: f64,
    pub trials: Vec<VerifTrial>,
}

impl VerifCondition {
    pub fn from_trials(condition: String, snr_db: Option<f64>, trials: Vec<VerifTrial>) -> Self {
        let (mut g, mut ga, mut i, mut ia) = (0, 0, 0, 0);
        for t in &trials {
            if t.is_genuine() {
                g += 1;
                ga += t.accepted as usize;
            } else {
                i += 1;
                ia += t.accepted as usize;
            }
        }
        Self {
            condition,
            snr_db,
            genuine_trials: g,
            genuine_accepted: ga,
            impostor_trials: i,
            impostor_accepted: ia,
            true_accept_pct: percent(ga, g),
            false_accept_pct: percent(ia, i),
            trials,
        }
    }
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

pub fn condition_name(snr_db: Option<f64>) -> String {
    match snr_db {
        None => "clean".into(),
        Some(s) => format!("snr{s}dB"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: EvalConfig,
    pub n_speakers: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub identification: Vec<IdentCondition>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub verification: Vec<VerifCondition>,
}

impl ExperimentReport {
    pub fn new(config: EvalConfig, n_speakers: usize) -> Self {
        Self {
            config,
            n_speakers,
            identification: Vec::new(),
            verification: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        r.check_consistency()?;
        Ok(r)
    }

    /// Recounts every condition from its trial log and compares with the
    /// stored summary numbers.
    pub fn check_consistency(&self) -> Result<()> {
        let bad = |what: &str, cond: &str| Err(Error::Format(format!("{what} disagrees with trial log in {cond}")));
        for c in &self.identification {
            let again = IdentCondition::from_trials(c.condition.clone(), c.snr_db, c.trials.clone());
            if again.correct != c.correct || again.total != c.total || again.accuracy_pct != c.accuracy_pct {
                return bad("identification accuracy", &c.condition);
            }
            if c.trials.iter().any(|t| t.correct != (t.speaker == t.predicted)) {
                return bad("identification correctness flag", &c.condition);
            }
            if !(0.0..=100.0).contains(&c.accuracy_pct) {
                return bad("identification range", &c.condition);
            }
        }
        for c in &self.verification {
            let again = VerifCondition::from_trials(c.condition.clone(), c.snr_db, c.trials.clone());
            if again != *c {
                return bad("verification rates", &c.condition);
            }
        }
        Ok(())
    }

    /// Plain-text summary tables: one row per condition.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let kind = self.config.feature.kind();
        let n = self.config.n_states;
        let m = self.config.n_mixtures;
        if !self.identification.is_empty() {
            writeln!(
                out,
                "SPEAKER IDENTIFICATION RESULTS (Q = {n}, M = {m}, {} speakers)",
                self.n_speakers
            )
            .unwrap();
            writeln!(out, "{:<8} {:<12} {:>8} {:>8} {:>12}", "Feature", "Condition", "Correct", "Total", "Accuracy %").unwrap();
            for c in &self.identification {
                writeln!(
                    out,
                    "{:<8} {:<12} {:>8} {:>8} {:>12.2}",
                    kind.as_str(),
                    c.condition,
                    c.correct,
                    c.total,
                    c.accuracy_pct
                )
                .unwrap();
            }
        }
        if !self.verification.is_empty() {
            if !out.is_empty() {
                out.push('\n');
            }
            writeln!(
                out,
                "SPEAKER VERIFICATION RESULTS (Q = {n}, M = {m}, alpha = {})",
                self.config.alpha
            )
            .unwrap();
            writeln!(
                out,
                "{:<8} {:<12} {:>10} {:>14} {:>10} {:>16}",
                "Feature", "Condition", "Genuine", "Accuracy %", "Impostor", "False Accept %"
            )
            .unwrap();
            for c in &self.verification {
                writeln!(
                    out,
                    "{:<8} {:<12} {:>10} {:>14.2} {:>10} {:>16.2}",
                    kind.as_str(),
                    c.condition,
                    c.genuine_trials,
                    c.true_accept_pct,
                    c.impostor_trials,
                    c.false_accept_pct
                )
                .unwrap();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;

    fn config() -> EvalConfig {
        EvalConfig {
            feature: FeatureParams::default_for(FeatureKind::Wpmfc),
            n_states: 1,
            n_mixtures: 13,
            train: TrainOptions::default(),
            alpha: 2.0,
        }
    }

    fn trial(s: &str, p: &str) -> IdentTrial {
        IdentTrial {
            speaker: s.into(),
            utterance: format!("{s}/x.wav"),
            predicted: p.into(),
            correct: s == p,
            score: -1.0,
        }
    }

    #[test]
    fn accuracy_matches_hand_count() {
        let c = IdentCondition::from_trials("clean".into(), None, vec![trial("a", "a"), trial("b", "a"), trial("c", "c"), trial("d", "d")]);
        assert_eq!((c.correct, c.total), (3, 4));
        assert_eq!(c.accuracy_pct, 75.0);
        let mut r = ExperimentReport::new(config(), 4);
        r.identification.push(c);
        r.check_consistency().unwrap();
        let back = ExperimentReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(r.to_table().contains("75.00"));

        r.identification[0].correct = 4;
        assert!(r.check_consistency().is_err());
    }

    #[test]
    fn verification_rates() {
        let t = |c: &str, a: &str, acc: bool| VerifTrial {
            claimed: c.into(),
            actual: a.into(),
            utterance: "u".into(),
            score: 0.0,
            threshold: 0.0,
            accepted: acc,
        };
        let c = VerifCondition::from_trials(
            "clean".into(),
            None,
            vec![t("a", "a", true), t("a", "a", false), t("a", "b", false), t("a", "c", true), t("a", "d", false), t("a", "e", false)],
        );
        assert_eq!(c.true_accept_pct, 50.0);
        assert_eq!(c.false_accept_pct, 25.0);
        let mut r = ExperimentReport::new(config(), 5);
        r.verification.push(c);
        r.check_consistency().unwrap();
        assert!(r.to_table().contains("False Accept"));
    }

    #[test]
    fn condition_names() {
        assert_eq!(condition_name(None), "clean");
        assert_eq!(condition_name(Some(-5.0)), "snr-5dB");
        assert_eq!(condition_name(Some(10.0)), "snr10dB");
    }
}
