//! Daubechies filters, periodic fast wavelet transform, full wavelet packet
//! tree, subband energies and the WP-MFC feature extractor.

mod filters;
mod packet;
mod wpmfc;

pub use filters::{daubechies_filters, WaveletFilterPair};
pub use packet::{dwt_step, gray, idwt_step, subband_energies, wpt_full, wpt_inverse, WpTree};
pub use wpmfc::{band_width_hz, padded_frame_len, wpmfc_features, wpmfc_features_with};
