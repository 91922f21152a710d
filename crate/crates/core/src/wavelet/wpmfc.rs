use rayon::prelude::*;

use crate::audio::AudioSignal;
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureParams, WpmfcParams};
use crate::frontend::{weight_spectrum_to_time, FftPair};
use crate::mfcc::{dct_ii, filterbank_for, prepare_frames, LOG_FLOOR};

use super::{daubechies_filters, subband_energies, wpt_full};

/// Smallest multiple of `2^depth` that holds `frame_len` samples.
pub fn padded_frame_len(frame_len: usize, depth: u32) -> usize {
    let block = 1usize << depth;
    frame_len.div_ceil(block) * block
}

/// Width of one packet leaf in Hz.
pub fn band_width_hz(sample_rate: u32, depth: u32) -> f64 {
    sample_rate as f64 / 2.0 / (1u64 << depth) as f64
}

/// WP-MFC features with the default parameters (db4, depth 7, 35 bands).
pub fn wpmfc_features(x: &AudioSignal) -> Result<FeatureMatrix> {
    wpmfc_features_with(x, &WpmfcParams::default())
}

/// Per frame: pre-emphasis, Hamming, FFT, mel weighting, IFFT, zero-pad to
/// a multiple of `2^depth`, packet decomposition, mean-square energies of
/// the `n_bands` lowest leaves, `log10`, then cepstrum `i = 1..=n_bands`.
pub fn wpmfc_features_with(x: &AudioSignal, params: &WpmfcParams) -> Result<FeatureMatrix> {
    let filters = daubechies_filters(params.wavelet_taps)?;
    if params.n_bands == 0 || params.n_bands > (1usize << params.depth) {
        return Err(Error::invalid(format!(
            "{} bands requested from a depth-{} tree",
            params.n_bands, params.depth
        )));
    }
    let frames = prepare_frames(x, &params.frontend)?;
    let fft = FftPair::for_frame_len(frames.frame_len);
    let weighting = filterbank_for(&params.frontend, fft.n_fft(), x.sample_rate)?.bin_weighting();
    let padded = padded_frame_len(frames.frame_len, params.depth);

    let rows: Vec<Vec<f64>> = frames
        .frames()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|frame| {
            let mut warped = weight_spectrum_to_time(&fft.forward(frame), &weighting, &fft)?;
            warped.resize(padded, 0.0);
            let tree = wpt_full(&warped, &filters, params.depth)?;
            let log_e: Vec<f64> = subband_energies(&tree, params.n_bands)?
                .into_iter()
                .map(|e| e.max(LOG_FLOOR).log10())
                .collect();
            Ok(dct_ii(&log_e, 1, params.n_bands))
        })
        .collect::<Result<_>>()?;
    FeatureMatrix::new(
        FeatureParams::Wpmfc(params.clone()),
        x.sample_rate,
        params.n_bands,
        rows.concat(),
    )
}
