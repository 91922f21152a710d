//! Shared time/frequency front end: pre-emphasis, framing, Hamming window,
//! FFT, mel filterbank and mel-warping of frame spectra.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::AudioSignal;
use crate::error::{Error, Result};

pub const PRE_EMPHASIS: f64 = 0.97;

/// `y[0] = x[0]`, `y[n] = x[n] - coeff * x[n-1]`.
pub fn pre_emphasize_with(x: &AudioSignal, coeff: f64) -> Result<AudioSignal> {
    if x.is_empty() {
        return Err(Error::EmptySignal);
    }
    let s = &x.samples;
    let mut out = Vec::with_capacity(s.len());
    out.push(s[0]);
    out.extend(s.windows(2).map(|w| w[1] - coeff * w[0]));
    Ok(AudioSignal::new(out, x.sample_rate))
}

/// First-order pre-emphasis `H(z) = 1 - 0.97 z^-1`.
pub fn pre_emphasize(x: &AudioSignal) -> Result<AudioSignal> {
    pre_emphasize_with(x, PRE_EMPHASIS)
}

/// Overlapping frames stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    data: Vec<f64>,
    pub n_frames: usize,
    pub frame_len: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl FrameMatrix {
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.frame_len..(t + 1) * self.frame_len]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.frame_len)
    }

    pub fn frames_mut(&mut self) -> impl Iterator<Item = &mut [f64]> + '_ {
        self.data.chunks_exact_mut(self.frame_len)
    }
}

/// Converts a duration in milliseconds to the nearest whole sample count.
pub fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    (ms * sample_rate as f64 / 1000.0).round() as usize
}

/// Number of full frames of length `frame_len` at stride `hop` in `n` samples.
pub fn frame_count(n: usize, frame_len: usize, hop: usize) -> usize {
    if n < frame_len {
        0
    } else {
        (n - frame_len) / hop + 1
    }
}

/// Splits `x` into frames of `frame_ms` every `hop_ms`. Trailing samples
/// that do not fill a frame are dropped.
pub fn frame_signal(x: &AudioSignal, frame_ms: f64, hop_ms: f64) -> Result<FrameMatrix> {
    if !(frame_ms > 0.0 && hop_ms > 0.0) || hop_ms > frame_ms {
        return Err(Error::invalid(format!(
            "frame/hop must be positive with hop <= frame (got {frame_ms} ms / {hop_ms} ms)"
        )));
    }
    let frame_len = ms_to_samples(frame_ms, x.sample_rate);
    let hop = ms_to_samples(hop_ms, x.sample_rate);
    frame_signal_samples(x, frame_len, hop)
}

pub fn frame_signal_samples(x: &AudioSignal, frame_len: usize, hop: usize) -> Result<FrameMatrix> {
    if frame_len == 0 || hop == 0 || hop > frame_len {
        return Err(Error::invalid(format!(
            "frame length {frame_len} / hop {hop} samples"
        )));
    }
    let n_frames = frame_count(x.len(), frame_len, hop);
    if n_frames == 0 {
        return Err(Error::SignalTooShort {
            len: x.len(),
            frame_len,
        });
    }
    let mut data = Vec::with_capacity(n_frames * frame_len);
    for t in 0..n_frames {
        data.extend_from_slice(&x.samples[t * hop..t * hop + frame_len]);
    }
    Ok(FrameMatrix {
        data,
        n_frames,
        frame_len,
        hop,
        sample_rate: x.sample_rate,
    })
}

/// Symmetric Hamming window `0.54 - 0.46 cos(2 pi n / (len - 1))`.
pub fn hamming_window(len: usize) -> Vec<f64> {
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / denom).cos())
        .collect()
}

pub fn apply_hamming(mut frames: FrameMatrix) -> Result<FrameMatrix> {
    if frames.frame_len < 2 {
        return Err(Error::invalid("Hamming window needs at least 2 samples"));
    }
    let w = hamming_window(frames.frame_len);
    for frame in frames.frames_mut() {
        frame.iter_mut().zip(&w).for_each(|(s, w)| *s *= w);
    }
    Ok(frames)
}

/// Full complex spectrum of a zero-padded real frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bins: Vec<Complex64>,
    /// Length of the frame before zero-padding.
    pub frame_len: usize,
}

impl Spectrum {
    pub fn n_fft(&self) -> usize {
        self.bins.len()
    }

    /// `|X[k]|^2` for `k = 0..=n_fft/2`.
    pub fn power(&self) -> Vec<f64> {
        self.bins[..=self.n_fft() / 2]
            .iter()
            .map(|c| c.norm_sqr())
            .collect()
    }
}

/// Forward/inverse transform pair for one padded length.
#[derive(Clone)]
pub struct FftPair {
    n_fft: usize,
    forward: Arc<dyn rustfft::Fft<f64>>,
    inverse: Arc<dyn rustfft::Fft<f64>>,
}

impl std::fmt::Debug for FftPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPair").field("n_fft", &self.n_fft).finish()
    }
}

impl FftPair {
    /// Plans transforms for frames of `frame_len` samples, padded to the
    /// next power of two.
    pub fn for_frame_len(frame_len: usize) -> Self {
        let n_fft = frame_len.max(1).next_power_of_two();
        let mut planner = FftPlanner::new();
        Self {
            n_fft,
            forward: planner.plan_fft_forward(n_fft),
            inverse: planner.plan_fft_inverse(n_fft),
        }
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn forward(&self, frame: &[f64]) -> Spectrum {
        assert!(frame.len() <= self.n_fft, "frame longer than FFT size");
        let mut bins = vec![Complex64::new(0.0, 0.0); self.n_fft];
        for (b, &x) in bins.iter_mut().zip(frame) {
            b.re = x;
        }
        self.forward.process(&mut bins);
        Spectrum {
            bins,
            frame_len: frame.len(),
        }
    }

    /// Inverse DFT normalised by `1/n_fft`; returns all `n_fft` complex samples.
    pub fn inverse(&self, bins: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(bins.len(), self.n_fft, "spectrum length differs from FFT size");
        let mut buf = bins.to_vec();
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.n_fft as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }
}

/// One-shot forward transform; pipelines should reuse an [`FftPair`].
pub fn forward_fft(frame: &[f64]) -> Spectrum {
    FftPair::for_frame_len(frame.len()).forward(frame)
}

/// Hz-to-mel mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MelScale {
    /// `2595 log10(1 + f/700)`.
    #[default]
    Htk,
    /// Linear below 1 kHz, logarithmic above (Slaney's Auditory Toolbox).
    Slaney,
}

const SLANEY_F_SP: f64 = 200.0 / 3.0;
const SLANEY_MIN_LOG_HZ: f64 = 1000.0;
const SLANEY_MIN_LOG_MEL: f64 = SLANEY_MIN_LOG_HZ / SLANEY_F_SP;

impl MelScale {
    pub fn hz_to_mel(self, hz: f64) -> f64 {
        match self {
            MelScale::Htk => 2595.0 * (1.0 + hz / 700.0).log10(),
            MelScale::Slaney => {
                if hz < SLANEY_MIN_LOG_HZ {
                    hz / SLANEY_F_SP
                } else {
                    SLANEY_MIN_LOG_MEL + (hz / SLANEY_MIN_LOG_HZ).ln() / slaney_logstep()
                }
            }
        }
    }

    pub fn mel_to_hz(self, mel: f64) -> f64 {
        match self {
            MelScale::Htk => 700.0 * (10f64.powf(mel / 2595.0) - 1.0),
            MelScale::Slaney => {
                if mel < SLANEY_MIN_LOG_MEL {
                    mel * SLANEY_F_SP
                } else {
                    SLANEY_MIN_LOG_HZ * (slaney_logstep() * (mel - SLANEY_MIN_LOG_MEL)).exp()
                }
            }
        }
    }
}

fn slaney_logstep() -> f64 {
    6.4f64.ln() / 27.0
}

pub fn hz_to_mel(hz: f64) -> f64 {
    MelScale::Htk.hz_to_mel(hz)
}

pub fn mel_to_hz(mel: f64) -> f64 {
    MelScale::Htk.mel_to_hz(mel)
}

/// Triangular filters equally spaced on the mel scale, sampled at the
/// `n_fft/2 + 1` FFT bin frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub n_filters: usize,
    pub n_fft: usize,
    pub sample_rate: u32,
    /// `n_filters` rows of `n_fft/2 + 1` weights.
    pub weights: Vec<Vec<f64>>,
    pub center_freqs_hz: Vec<f64>,
    /// The `n_filters + 2` band edges in Hz.
    pub boundaries_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// `W(k) = sum_m weights[m][k]`, normalised to a peak of 1.
    pub fn bin_weighting(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n_bins()];
        for row in &self.weights {
            w.iter_mut().zip(row).for_each(|(acc, v)| *acc += v);
        }
        let peak = w.iter().cloned().fold(0.0, f64::max);
        if peak > 0.0 {
            w.iter_mut().for_each(|v| *v /= peak);
        }
        w
    }
}

pub fn build_mel_filterbank(
    n_filters: usize,
    n_fft: usize,
    sample_rate: u32,
    f_lo: f64,
    f_hi: f64,
) -> Result<MelFilterbank> {
    build_mel_filterbank_with(n_filters, n_fft, sample_rate, f_lo, f_hi, MelScale::Htk)
}

pub fn build_mel_filterbank_with(
    n_filters: usize,
    n_fft: usize,
    sample_rate: u32,
    f_lo: f64,
    f_hi: f64,
    scale: MelScale,
) -> Result<MelFilterbank> {
    let nyquist = sample_rate as f64 / 2.0;
    if n_filters == 0 {
        return Err(Error::invalid("mel filterbank needs at least one filter"));
    }
    if n_fft < 2 {
        return Err(Error::invalid(format!("FFT length {n_fft} too small")));
    }
    if !(f_lo >= 0.0 && f_lo < f_hi && f_hi <= nyquist) {
        return Err(Error::invalid(format!(
            "degenerate band edges: {f_lo} Hz .. {f_hi} Hz (Nyquist {nyquist} Hz)"
        )));
    }
    let mel_lo = scale.hz_to_mel(f_lo);
    let mel_hi = scale.hz_to_mel(f_hi);
    let step = (mel_hi - mel_lo) / (n_filters + 1) as f64;
    let boundaries_hz: Vec<f64> = (0..n_filters + 2)
        .map(|i| scale.mel_to_hz(mel_lo + step * i as f64))
        .collect();
    let n_bins = n_fft / 2 + 1;
    let bin_hz = sample_rate as f64 / n_fft as f64;

    let mut weights = Vec::with_capacity(n_filters);
    for m in 1..=n_filters {
        let (lo, mid, hi) = (boundaries_hz[m - 1], boundaries_hz[m], boundaries_hz[m + 1]);
        let row: Vec<f64> = (0..n_bins)
            .map(|k| {
                let f = k as f64 * bin_hz;
                if f <= lo || f >= hi {
                    0.0
                } else if f <= mid {
                    (f - lo) / (mid - lo)
                } else {
                    (hi - f) / (hi - mid)
                }
            })
            .collect();
        if row.iter().all(|&w| w == 0.0) {
            return Err(Error::invalid(format!(
                "degenerate band edges: filter {m} ({lo:.1}..{hi:.1} Hz) covers no FFT bin"
            )));
        }
        weights.push(row);
    }
    Ok(MelFilterbank {
        n_filters,
        n_fft,
        sample_rate,
        weights,
        center_freqs_hz: boundaries_hz[1..=n_filters].to_vec(),
        boundaries_hz,
    })
}

/// Applies the real bin weighting `weighting` (`n_fft/2 + 1` values,
/// mirrored onto the negative frequencies) to the complex spectrum and
/// inverse-transforms, keeping the first `spectrum.frame_len` samples.
pub fn weight_spectrum_to_time(spectrum: &Spectrum, weighting: &[f64], fft: &FftPair) -> Result<Vec<f64>> {
    let n = spectrum.n_fft();
    if weighting.len() != n / 2 + 1 {
        return Err(Error::DimensionMismatch {
            expected: n / 2 + 1,
            actual: weighting.len(),
        });
    }
    check_conjugate_symmetric(&spectrum.bins)?;
    let weighted: Vec<Complex64> = spectrum
        .bins
        .iter()
        .enumerate()
        .map(|(k, c)| c * weighting[k.min(n - k)])
        .collect();
    let time = fft.inverse(&weighted);
    Ok(time[..spectrum.frame_len].iter().map(|c| c.re).collect())
}

/// Mel-warps a frame spectrum with the filterbank's summed triangular
/// response (phase preserved) and returns the frame in the time domain.
pub fn mel_warp_to_time(spectrum: &Spectrum, fb: &MelFilterbank) -> Result<Vec<f64>> {
    if fb.n_fft != spectrum.n_fft() {
        return Err(Error::DimensionMismatch {
            expected: fb.n_fft,
            actual: spectrum.n_fft(),
        });
    }
    let fft = FftPair::for_frame_len(spectrum.n_fft());
    weight_spectrum_to_time(spectrum, &fb.bin_weighting(), &fft)
}

fn check_conjugate_symmetric(bins: &[Complex64]) -> Result<()> {
    let n = bins.len();
    let scale = bins.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
    for k in 0..=n / 2 {
        let mirror = bins[(n - k) % n].conj();
        if (bins[k] - mirror).norm() > tol {
            return Err(Error::NotConjugateSymmetric { bin: k });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sig(v: &[f64]) -> AudioSignal {
        AudioSignal::new(v.to_vec(), 48000)
    }

    #[test]
    fn pre_emphasis_examples() {
        let y = pre_emphasize(&sig(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(y.samples[0], 1.0);
        assert!((y.samples[1] - 0.03).abs() < 1e-15);
        assert!((y.samples[2] - 0.03).abs() < 1e-15);
        let y = pre_emphasize(&sig(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(y.samples, vec![1.0, -0.97, 0.0]);
        let y = pre_emphasize(&sig(&[0.0; 5])).unwrap();
        assert!(y.samples.iter().all(|&v| v == 0.0));
        assert!(matches!(pre_emphasize(&sig(&[])), Err(Error::EmptySignal)));
    }

    #[test]
    fn framing_examples() {
        let x = sig(&vec![0.0; 48000]);
        let f = frame_signal(&x, 25.0, 10.0).unwrap();
        assert_eq!((f.frame_len, f.hop, f.n_frames), (1200, 480, 98));
        assert_eq!(frame_signal(&sig(&vec![0.0; 1200]), 25.0, 10.0).unwrap().n_frames, 1);
        let err = frame_signal(&sig(&vec![0.0; 1199]), 25.0, 10.0).unwrap_err();
        assert!(err.to_string().contains("signal shorter than one frame"));
        assert!(frame_signal(&x, 10.0, 25.0).is_err());
        assert!(frame_signal(&x, 0.0, 0.0).is_err());
    }

    #[test]
    fn frames_overlap_by_frame_minus_hop() {
        let x = sig(&(0..5000).map(|i| i as f64).collect::<Vec<_>>());
        let f = frame_signal(&x, 25.0, 10.0).unwrap();
        for t in 1..f.n_frames {
            assert_eq!(&f.frame(t - 1)[f.hop..], &f.frame(t)[..f.frame_len - f.hop]);
        }
    }

    #[test]
    fn hamming_examples() {
        let w = hamming_window(1200);
        assert!((w[0] - 0.08).abs() < 1e-15);
        for n in 0..w.len() {
            assert!((w[n] - w[w.len() - 1 - n]).abs() < 1e-12);
        }
        let ones = frame_signal_samples(&sig(&[1.0; 64]), 64, 32).unwrap();
        let windowed = apply_hamming(ones).unwrap();
        assert_eq!(windowed.frame(0), hamming_window(64).as_slice());
        let tiny = frame_signal_samples(&sig(&[1.0; 4]), 1, 1).unwrap();
        assert!(apply_hamming(tiny).is_err());
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut x = vec![0.0; 1200];
        x[0] = 1.0;
        let s = forward_fft(&x);
        assert_eq!(s.n_fft(), 2048);
        assert!(s.bins.iter().all(|c| (c.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn bin_sinusoid_concentrates_energy() {
        let n = 256;
        let k0 = 17;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * k0 as f64 * i as f64 / n as f64).cos())
            .collect();
        let s = forward_fft(&x);
        let total: f64 = s.bins.iter().map(|c| c.norm_sqr()).sum();
        let peak = s.bins[k0].norm_sqr() + s.bins[n - k0].norm_sqr();
        assert!(peak / total > 1.0 - 1e-12);
    }

    #[test]
    fn parseval_against_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for len in [100usize, 1200, 1280] {
            let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = forward_fft(&x);
            let time: f64 = x.iter().map(|v| v * v).sum();
            let freq: f64 = s.bins.iter().map(|c| c.norm_sqr()).sum::<f64>() / s.n_fft() as f64;
            assert!(((time - freq) / time).abs() < 1e-9);
        }
    }

    #[test]
    fn fft_matches_direct_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = forward_fft(&x);
        let n = s.n_fft();
        for k in [0usize, 1, 5, 31, 63] {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &v) in x.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                acc += Complex64::from_polar(v, ang);
            }
            assert!((acc - s.bins[k]).norm() < 1e-10);
        }
    }

    #[test]
    fn fft_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..1200).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fft = FftPair::for_frame_len(1200);
        let back = fft.inverse(&fft.forward(&x).bins);
        let err: f64 = (0..2048)
            .map(|i| {
                let orig = if i < 1200 { x[i] } else { 0.0 };
                (back[i] - Complex64::new(orig, 0.0)).norm_sqr()
            })
            .sum::<f64>()
            .sqrt();
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / norm < 1e-9);
    }

    #[test]
    fn mel_formula() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        assert!((hz_to_mel(700.0) - 781.17).abs() < 0.01);
        assert!((mel_to_hz(hz_to_mel(1234.5)) - 1234.5).abs() < 1e-9);
        let s = MelScale::Slaney;
        assert!((s.hz_to_mel(1000.0) - 15.0).abs() < 1e-12);
        assert!((s.mel_to_hz(s.hz_to_mel(4321.0)) - 4321.0).abs() < 1e-9);
    }

    #[test]
    fn filterbank_shape() {
        let fb = build_mel_filterbank(40, 2048, 48000, 0.0, 24000.0).unwrap();
        assert_eq!(fb.weights.len(), 40);
        assert_eq!(fb.weights[0].len(), 1025);
        for w in fb.boundaries_hz.windows(2) {
            assert!(w[1] > w[0]);
        }
        let mels: Vec<f64> = fb.center_freqs_hz.iter().map(|&f| hz_to_mel(f)).collect();
        let step = mels[1] - mels[0];
        for w in mels.windows(2) {
            assert!((w[1] - w[0] - step).abs() < 1e-9);
        }
        for row in &fb.weights {
            assert!(row.iter().all(|&w| (0.0..=1.0).contains(&w)));
            let peak = row.iter().cloned().fold(0.0, f64::max);
            let apex = row.iter().position(|&w| w == peak).unwrap();
            assert!(row[..=apex].windows(2).all(|p| p[1] >= p[0]));
            assert!(row[apex..].windows(2).all(|p| p[1] <= p[0]));
        }
        // interior bins are covered by at least one filter
        let bin_hz = 48000.0 / 2048.0;
        for k in 0..fb.n_bins() {
            let f = k as f64 * bin_hz;
            if f > fb.boundaries_hz[0] && f < fb.boundaries_hz[41] {
                assert!(fb.weights.iter().map(|r| r[k]).sum::<f64>() > 0.0, "bin {k}");
            }
        }
    }

    #[test]
    fn apex_weight_is_one_when_on_bin() {
        // 8 kHz, n_fft 8000 gives 1 Hz bins; choose edges so apexes land on bins
        let fb = build_mel_filterbank(1, 8000, 8000, 0.0, 4000.0).unwrap();
        let apex = fb.center_freqs_hz[0];
        let k = apex.round() as usize;
        let expect = if (apex - k as f64).abs() < 1e-12 { 1.0 } else { fb.weights[0][k] };
        assert!((fb.weights[0][k] - expect).abs() < 1e-12);
        let max = fb.weights[0].iter().cloned().fold(0.0, f64::max);
        assert!(max > 0.999);
    }

    #[test]
    fn filterbank_errors() {
        assert!(build_mel_filterbank(0, 512, 16000, 0.0, 8000.0).is_err());
        assert!(build_mel_filterbank(10, 512, 16000, 500.0, 500.0).is_err());
        assert!(build_mel_filterbank(10, 512, 16000, 0.0, 9000.0).is_err());
        // far too many filters for the bin spacing
        assert!(build_mel_filterbank(400, 64, 16000, 0.0, 8000.0).is_err());
    }

    #[test]
    fn flat_weighting_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..1200).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fft = FftPair::for_frame_len(1200);
        let s = fft.forward(&x);
        let y = weight_spectrum_to_time(&s, &vec![1.0; 1025], &fft).unwrap();
        assert_eq!(y.len(), 1200);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn warp_zero_and_energy() {
        let fb = build_mel_filterbank(40, 2048, 48000, 0.0, 24000.0).unwrap();
        let z = mel_warp_to_time(&forward_fft(&vec![0.0; 1200]), &fb).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        let fft = FftPair::for_frame_len(1200);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x: Vec<f64> = (0..1200).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = fft.forward(&x);
            let y = weight_spectrum_to_time(&s, &fb.bin_weighting(), &fft).unwrap();
            // compare on the full padded frame where Parseval applies exactly
            let weighted: Vec<Complex64> = s
                .bins
                .iter()
                .enumerate()
                .map(|(k, c)| c * fb.bin_weighting()[k.min(2048 - k)])
                .collect();
            let full: f64 = fft.inverse(&weighted).iter().map(|c| c.re * c.re).sum();
            let ein: f64 = x.iter().map(|v| v * v).sum();
            let eout: f64 = y.iter().map(|v| v * v).sum();
            assert!(full <= ein * (1.0 + 1e-12));
            assert!(eout <= full * (1.0 + 1e-12));
        }
    }

    #[test]
    fn warp_rejects_asymmetric_spectrum() {
        let fb = build_mel_filterbank(10, 64, 8000, 0.0, 4000.0).unwrap();
        let mut s = forward_fft(&[1.0, 2.0, 3.0]);
        s.bins = vec![Complex64::new(0.0, 0.0); 64];
        s.bins[3] = Complex64::new(1.0, 0.0);
        assert!(matches!(
            mel_warp_to_time(&s, &fb),
            Err(Error::NotConjugateSymmetric { .. })
        ));
    }

    proptest! {
        #[test]
        fn front_end_is_linear(
            x in prop::collection::vec(-1.0f64..1.0, 200..400),
            alpha in -10.0f64..10.0,
        ) {
            let a = sig(&x);
            let b = a.scaled(alpha);
            let fa = apply_hamming(frame_signal_samples(&pre_emphasize(&a).unwrap(), 100, 40).unwrap()).unwrap();
            let fb = apply_hamming(frame_signal_samples(&pre_emphasize(&b).unwrap(), 100, 40).unwrap()).unwrap();
            for (ra, rb) in fa.frames().zip(fb.frames()) {
                for (u, v) in ra.iter().zip(rb) {
                    prop_assert!((alpha * u - v).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn frame_count_invariant(n in 1usize..5000, len in 1usize..300, hop_frac in 0.1f64..1.0) {
            let hop = ((len as f64 * hop_frac) as usize).max(1);
            let x = sig(&vec![0.0; n]);
            match frame_signal_samples(&x, len, hop) {
                Ok(f) => prop_assert_eq!(f.n_frames, (n - len) / hop + 1),
                Err(_) => prop_assert!(n < len),
            }
        }
    }
}
