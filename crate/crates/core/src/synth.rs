//! Synthetic "speakers": Gaussian white noise shaped by a speaker-specific
//! set of two-pole resonators. Used by the end-to-end tests and benches.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::audio::{write_wav, AudioSignal};
use crate::error::{Error, Result};
use crate::eval::{DatasetManifest, Split};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpeaker {
    pub id: String,
    pub resonances_hz: Vec<f64>,
    pub bandwidth_hz: f64,
}

/// `n` speakers with pairwise disjoint resonance sets, all below 5 kHz.
pub fn resonator_speakers(n: usize) -> Vec<SyntheticSpeaker> {
    (0..n)
        .map(|s| {
            let s_f = s as f64;
            SyntheticSpeaker {
                id: format!("spk{:02}", s + 1),
                resonances_hz: vec![350.0 + 110.0 * s_f, 1200.0 + 260.0 * s_f, 2600.0 + 430.0 * s_f],
                bandwidth_hz: 80.0,
            }
        })
        .collect()
}

/// Two-pole resonator `y[n] = x[n] + 2 r cos(theta) y[n-1] - r^2 y[n-2]`.
fn resonate(x: &[f64], freq: f64, bandwidth: f64, sample_rate: u32) -> Vec<f64> {
    let sr = sample_rate as f64;
    let r = (-std::f64::consts::PI * bandwidth / sr).exp();
    let a1 = 2.0 * r * (2.0 * std::f64::consts::PI * freq / sr).cos();
    let a2 = -r * r;
    let (mut y1, mut y2) = (0.0, 0.0);
    x.iter()
        .map(|&v| {
            let y = v + a1 * y1 + a2 * y2;
            y2 = y1;
            y1 = y;
            y
        })
        .collect()
}

impl SyntheticSpeaker {
    /// One utterance of `secs` seconds at a random level between -26 and
    /// -14 dBFS RMS, with a -40 dB broadband floor.
    pub fn utterance(&self, secs: f64, sample_rate: u32, seed: u64) -> AudioSignal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (secs * sample_rate as f64).round() as usize;
        let excitation: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut shaped = vec![0.0; n];
        for &f in &self.resonances_hz {
            let y = resonate(&excitation, f, self.bandwidth_hz, sample_rate);
            shaped.iter_mut().zip(&y).for_each(|(a, b)| *a += b);
        }
        let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt();
        let shaped_rms = rms(&shaped).max(f64::MIN_POSITIVE);
        let floor_gain = 0.01 * shaped_rms;
        for s in shaped.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *s += floor_gain * e;
        }
        let level_db: f64 = rng.gen_range(-26.0..-14.0);
        let target = 10f64.powf(level_db / 20.0);
        let g = target / rms(&shaped).max(f64::MIN_POSITIVE);
        AudioSignal::new(shaped.into_iter().map(|s| s * g).collect(), sample_rate)
    }
}

/// `n_utts` utterances per speaker, seeded from `seed`.
pub fn corpus(
    speakers: &[SyntheticSpeaker],
    n_utts: usize,
    secs: f64,
    sample_rate: u32,
    seed: u64,
) -> Vec<(String, Vec<AudioSignal>)> {
    speakers
        .iter()
        .enumerate()
        .map(|(s, spk)| {
            let utts = (0..n_utts)
                .map(|u| spk.utterance(secs, sample_rate, seed ^ ((s as u64) << 32 | u as u64)))
                .collect();
            (spk.id.clone(), utts)
        })
        .collect()
}

/// Writes a corpus as 16-bit WAV files under `dir/<speaker>/uttNN.wav`
/// with a manifest at `dir/manifest.txt` (first `n_train` train, rest test).
pub fn write_corpus(
    dir: &Path,
    corpus: &[(String, Vec<AudioSignal>)],
    n_train: usize,
) -> Result<PathBuf> {
    let mut lines = Vec::new();
    for (id, utts) in corpus {
        let spk_dir = dir.join(id);
        std::fs::create_dir_all(&spk_dir).map_err(|e| Error::io(&spk_dir, e))?;
        for (u, sig) in utts.iter().enumerate() {
            let rel = format!("{id}/utt{:02}.wav", u + 1);
            write_wav(dir.join(&rel), sig)?;
            let split = if u < n_train { Split::Train } else { Split::Test };
            lines.push((id.clone(), split, PathBuf::from(rel)));
        }
    }
    let path = dir.join("manifest.txt");
    DatasetManifest::from_entries(dir, lines)?.write(&path)?;
    Ok(path)
}
