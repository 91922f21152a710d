//! Baseline mel-frequency cepstral coefficients.

use rayon::prelude::*;

use crate::audio::AudioSignal;
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureParams, FrontendParams, MfccParams};
use crate::frontend::{
    apply_hamming, build_mel_filterbank_with, frame_signal, pre_emphasize_with, FftPair,
    FrameMatrix, MelFilterbank,
};

/// Floor applied before every log so silent frames stay finite.
pub const LOG_FLOOR: f64 = 1e-12;

/// `log10(max(sum_k w[m][k] P[k], 1e-12))` for each filter `m`.
pub fn log_energies(power_spectrum: &[f64], fb: &MelFilterbank) -> Result<Vec<f64>> {
    if power_spectrum.len() != fb.n_bins() {
        return Err(Error::DimensionMismatch {
            expected: fb.n_bins(),
            actual: power_spectrum.len(),
        });
    }
    Ok(fb
        .weights
        .iter()
        .map(|row| {
            let e: f64 = row.iter().zip(power_spectrum).map(|(w, p)| w * p).sum();
            e.max(LOG_FLOOR).log10()
        })
        .collect())
}

/// `F(i) = sum_{n=1..B} x[n] cos(pi i (n - 1/2) / B)` for `i = first..first+count`.
///
/// For `i >= 1` the cosines sum to zero, so the mean of `x` is removed
/// before summing; constant inputs then give exactly zero instead of
/// accumulated rounding error.
pub fn dct_ii(x: &[f64], first: usize, count: usize) -> Vec<f64> {
    let b = x.len() as f64;
    let mean = x.iter().sum::<f64>() / b;
    (first..first + count)
        .map(|i| {
            if i == 0 {
                return x.iter().sum();
            }
            x.iter()
                .enumerate()
                .map(|(n, v)| (v - mean) * (std::f64::consts::PI * i as f64 * (n as f64 + 0.5) / b).cos())
                .sum()
        })
        .collect()
}

/// Cepstral coefficients `i = 1..=n_coeffs` of a log-energy vector.
pub fn dct_cepstrum(log_e: &[f64], n_coeffs: usize) -> Result<Vec<f64>> {
    if n_coeffs == 0 || n_coeffs > log_e.len() {
        return Err(Error::invalid(format!(
            "cepstrum length {n_coeffs} outside 1..={}",
            log_e.len()
        )));
    }
    Ok(dct_ii(log_e, 1, n_coeffs))
}

pub(crate) fn prepare_frames(x: &AudioSignal, p: &FrontendParams) -> Result<FrameMatrix> {
    let emphasized = pre_emphasize_with(x, p.pre_emphasis)?;
    apply_hamming(frame_signal(&emphasized, p.frame_ms, p.hop_ms)?)
}

pub(crate) fn filterbank_for(p: &FrontendParams, n_fft: usize, sample_rate: u32) -> Result<MelFilterbank> {
    build_mel_filterbank_with(
        p.n_mel_filters,
        n_fft,
        sample_rate,
        0.0,
        sample_rate as f64 / 2.0,
        p.mel_scale,
    )
}

/// 13 MFCCs per 25 ms frame with the default parameters.
pub fn mfcc_features(x: &AudioSignal) -> Result<FeatureMatrix> {
    mfcc_features_with(x, &MfccParams::default())
}

pub fn mfcc_features_with(x: &AudioSignal, params: &MfccParams) -> Result<FeatureMatrix> {
    let fp = &params.frontend;
    if params.n_coeffs == 0 || params.n_coeffs > fp.n_mel_filters {
        return Err(Error::invalid(format!(
            "{} coefficients from {} filters",
            params.n_coeffs, fp.n_mel_filters
        )));
    }
    let frames = prepare_frames(x, fp)?;
    let fft = FftPair::for_frame_len(frames.frame_len);
    let fb = filterbank_for(fp, fft.n_fft(), x.sample_rate)?;
    let first = usize::from(!params.include_c0);
    let rows: Vec<Vec<f64>> = frames
        .frames()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|frame| {
            let power = fft.forward(frame).power();
            let log_e = log_energies(&power, &fb)?;
            Ok(dct_ii(&log_e, first, params.n_coeffs))
        })
        .collect::<Result<_>>()?;
    FeatureMatrix::new(
        FeatureParams::Mfcc(params.clone()),
        x.sample_rate,
        params.n_coeffs,
        rows.concat(),
    )
}
