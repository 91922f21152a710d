//! Speaker recognition with wavelet-packet mel-frequency cepstral (WP-MFC)
//! and baseline MFCC features, scored by Gaussian-mixture / continuous
//! density HMM models.
//!
//! ```no_run
//! use wpmfc_core::{audio, wavelet, models};
//!
//! let x = audio::load_wav("speaker01/utt01.wav")?;
//! let feats = wavelet::wpmfc_features(&x)?;
//! let trained = models::em_train(&[feats], 1, 13, &models::TrainOptions::default())?;
//! # Ok::<(), wpmfc_core::Error>(())
//! ```

#![allow(clippy::needless_range_loop)]

pub mod audio;
pub mod error;
pub mod eval;
pub mod features;
pub mod frontend;
pub mod mfcc;
pub mod models;
pub mod recognition;
pub mod synth;
pub mod wavelet;

pub use audio::{AudioSignal, SnrSpec};
pub use error::{Error, Result};
pub use features::{FeatureKind, FeatureMatrix, FeatureParams, MfccParams, WpmfcParams};
pub use models::{CdhmmModel, TrainOptions};
pub use recognition::{SpeakerDatabase, VerificationProfile};

/// Extracts features of the kind described by `params`.
pub fn extract_features(x: &AudioSignal, params: &FeatureParams) -> Result<FeatureMatrix> {
    match params {
        FeatureParams::Mfcc(p) => mfcc::mfcc_features_with(x, p),
        FeatureParams::Wpmfc(p) => wavelet::wpmfc_features_with(x, p),
        FeatureParams::Generic => Err(Error::invalid("generic features have no extractor")),
    }
}
