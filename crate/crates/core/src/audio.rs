//! WAV ingestion and SNR-controlled noise corruption.
//!
//! Only 16-bit PCM mono RIFF/WAVE is accepted. Corpora recorded at other
//! rates, depths or channel counts (NOISEX noise in particular) must be
//! converted to the speech sample rate, 16-bit mono, before use.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mono sample sequence with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Mean-square power over the whole signal.
    pub fn power(&self) -> f64 {
        mean_square(&self.samples)
    }

    pub fn scaled(&self, gain: f64) -> AudioSignal {
        AudioSignal::new(
            self.samples.iter().map(|s| s * gain).collect(),
            self.sample_rate,
        )
    }
}

/// Target signal-to-noise ratio in decibels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrSpec {
    pub target_snr_db: f64,
}

impl SnrSpec {
    /// SNR conditions of the noisy identification experiments.
    pub const EVALUATION_SET_DB: [f64; 4] = [-5.0, 5.0, 10.0, 20.0];

    pub fn new(target_snr_db: f64) -> Result<Self> {
        if !target_snr_db.is_finite() {
            return Err(Error::invalid(format!("SNR must be finite, got {target_snr_db}")));
        }
        Ok(Self { target_snr_db })
    }
}

fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Reads a 16-bit PCM mono WAV file, scaling samples by 1/32768.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioSignal> {
    let path = path.as_ref();
    let wav_err = |message: String| Error::Wav {
        path: path.to_path_buf(),
        message,
    };
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => wav_err(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(wav_err(format!(
            "unsupported encoding: {:?} {}-bit (16-bit PCM required)",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.channels != 1 {
        return Err(Error::Multichannel {
            channels: spec.channels,
        });
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_err(e.to_string()))?;
    if samples.is_empty() {
        return Err(wav_err("zero-length payload".into()));
    }
    Ok(AudioSignal::new(samples, spec.sample_rate))
}

/// Writes a signal as 16-bit PCM mono. Samples outside [-1, 1) saturate;
/// the number of saturated samples is returned.
pub fn write_wav(path: impl AsRef<Path>, signal: &AudioSignal) -> Result<usize> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wav_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Wav {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    let mut clipped = 0;
    for &s in &signal.samples {
        let q = (s * 32768.0).round();
        if q > f64::from(i16::MAX) || q < f64::from(i16::MIN) {
            clipped += 1;
        }
        let q = q.clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16;
        writer.write_sample(q).map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)?;
    Ok(clipped)
}

/// Adds `noise`, tiled or truncated to the clean length, scaled so the
/// full-utterance SNR equals `spec.target_snr_db`.
///
/// The gain is `sqrt(P_clean / (P_noise * 10^(snr/10)))` with powers taken
/// as mean squares over the clean length. No clipping is applied.
pub fn mix_noise(clean: &AudioSignal, noise: &AudioSignal, spec: SnrSpec) -> Result<AudioSignal> {
    if clean.sample_rate != noise.sample_rate {
        return Err(Error::SampleRateMismatch {
            left: clean.sample_rate,
            right: noise.sample_rate,
        });
    }
    if noise.is_empty() {
        return Err(Error::ZeroPower("noise"));
    }
    let tiled: Vec<f64> = noise
        .samples
        .iter()
        .copied()
        .cycle()
        .take(clean.len())
        .collect();
    let p_clean = clean.power();
    let p_noise = mean_square(&tiled);
    if p_clean <= 0.0 {
        return Err(Error::ZeroPower("clean"));
    }
    if p_noise <= 0.0 {
        return Err(Error::ZeroPower("noise"));
    }
    let gain = noise_gain(p_clean, p_noise, spec.target_snr_db);
    let samples = clean
        .samples
        .iter()
        .zip(&tiled)
        .map(|(c, n)| c + gain * n)
        .collect();
    Ok(AudioSignal::new(samples, clean.sample_rate))
}

/// Amplitude gain applied to noise of power `p_noise` to reach `snr_db`
/// against a signal of power `p_clean`.
pub fn noise_gain(p_clean: f64, p_noise: f64, snr_db: f64) -> f64 {
    (p_clean / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt()
}

/// `10 log10(P_clean / P_noise)` over equal-length signals.
pub fn measure_snr(clean: &AudioSignal, noise_component: &AudioSignal) -> Result<f64> {
    if clean.sample_rate != noise_component.sample_rate {
        return Err(Error::SampleRateMismatch {
            left: clean.sample_rate,
            right: noise_component.sample_rate,
        });
    }
    if clean.len() != noise_component.len() {
        return Err(Error::LengthMismatch {
            expected: clean.len(),
            actual: noise_component.len(),
        });
    }
    let p_clean = clean.power();
    let p_noise = noise_component.power();
    if p_clean <= 0.0 {
        return Err(Error::ZeroPower("clean"));
    }
    if p_noise <= 0.0 {
        return Err(Error::ZeroPower("noise"));
    }
    Ok(10.0 * (p_clean / p_noise).log10())
}

/// Sample-wise `a - b` for equal-length signals.
pub fn difference(a: &AudioSignal, b: &AudioSignal) -> Result<AudioSignal> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(AudioSignal::new(
        a.samples.iter().zip(&b.samples).map(|(x, y)| x - y).collect(),
        a.sample_rate,
    ))
}
