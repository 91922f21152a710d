use std::path::Path;

use anyhow::{bail, Context};
use clap::Args;
use serde::Deserialize;

use wpmfc_core::audio::SnrSpec;
use wpmfc_core::features::{FrontendParams, MfccParams, WpmfcParams};
use wpmfc_core::{FeatureKind, FeatureParams, TrainOptions};

/// Settings that may come from flags or from a `--config` TOML file.
/// Flags win over the file, the file wins over built-in defaults.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// Feature kind: mfcc or wpmfc.
    #[arg(long)]
    pub kind: Option<String>,
    /// Frame length in milliseconds.
    #[arg(long)]
    pub frame_ms: Option<f64>,
    /// Frame hop in milliseconds.
    #[arg(long)]
    pub hop_ms: Option<f64>,
    /// Number of triangular mel filters.
    #[arg(long)]
    pub mel_filters: Option<usize>,
    /// MFCC coefficients per frame.
    #[arg(long)]
    pub coeffs: Option<usize>,
    /// Prepend c0 to each MFCC vector.
    #[arg(long)]
    pub include_c0: Option<bool>,
    /// Daubechies filter length for WP-MFC: 2, 4 or 8.
    #[arg(long)]
    pub taps: Option<usize>,
    /// WP-MFC subbands kept.
    #[arg(long)]
    pub bands: Option<usize>,
    /// Gaussian components per state (M).
    #[arg(short = 'M', long)]
    pub mixtures: Option<usize>,
    /// HMM states (Q); 1 trains a GMM.
    #[arg(short = 'Q', long)]
    pub states: Option<usize>,
    /// Maximum EM iterations.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Verification threshold = mean - alpha * std.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Top-level random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated SNR list in dB, e.g. "-5,5,10,20". Empty for none.
    #[arg(long, value_parser = parse_snr_list, allow_hyphen_values = true)]
    #[serde(default, deserialize_with = "snr_from_toml")]
    pub snr: Option<SnrList>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrList(pub Vec<f64>);

pub fn parse_snr_list(s: &str) -> Result<SnrList, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("invalid SNR value '{t}'"))
        })
        .collect::<Result<_, _>>()
        .map(SnrList)
}

fn snr_from_toml<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<SnrList>, D::Error> {
    let v: Option<Vec<f64>> = Option::deserialize(d)?;
    Ok(v.map(SnrList))
}

macro_rules! overlay {
    ($self:ident, $base:ident, $($f:ident),*) => {
        Settings { $($f: $self.$f.clone().or_else(|| $base.$f.clone()),)* }
    };
}

impl Settings {
    pub fn load_file(path: &Path) -> anyhow::Result<Settings> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// `self` with unset fields taken from `base`.
    pub fn over(&self, base: &Settings) -> Settings {
        overlay!(
            self, base, kind, frame_ms, hop_ms, mel_filters, coeffs, include_c0, taps, bands, mixtures, states,
            max_iters, alpha, seed, snr
        )
    }

    pub fn kind(&self) -> anyhow::Result<FeatureKind> {
        let kind: FeatureKind = self.kind.as_deref().unwrap_or("wpmfc").parse()?;
        if kind == FeatureKind::Generic {
            bail!("feature kind must be mfcc or wpmfc");
        }
        Ok(kind)
    }

    pub fn feature_params(&self) -> anyhow::Result<FeatureParams> {
        let mut frontend = FrontendParams::default();
        if let Some(v) = self.frame_ms {
            frontend.frame_ms = v;
        }
        if let Some(v) = self.hop_ms {
            frontend.hop_ms = v;
        }
        if let Some(v) = self.mel_filters {
            frontend.n_mel_filters = v;
        }
        Ok(match self.kind()? {
            FeatureKind::Mfcc => {
                let d = MfccParams::default();
                FeatureParams::Mfcc(MfccParams {
                    frontend,
                    n_coeffs: self.coeffs.unwrap_or(d.n_coeffs),
                    include_c0: self.include_c0.unwrap_or(d.include_c0),
                })
            }
            _ => {
                let d = WpmfcParams::default();
                FeatureParams::Wpmfc(WpmfcParams {
                    frontend,
                    wavelet_taps: self.taps.unwrap_or(d.wavelet_taps),
                    depth: d.depth,
                    n_bands: self.bands.unwrap_or(d.n_bands),
                })
            }
        })
    }

    pub fn train_options(&self) -> TrainOptions {
        let d = TrainOptions::default();
        TrainOptions {
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            seed: self.seed.unwrap_or(d.seed),
            ..d
        }
    }

    pub fn mixtures(&self) -> usize {
        self.mixtures.unwrap_or(13)
    }

    pub fn states(&self) -> usize {
        self.states.unwrap_or(1)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(wpmfc_core::recognition::DEFAULT_ALPHA)
    }

    /// The configured SNR list, or the standard evaluation set.
    pub fn snrs(&self) -> Vec<f64> {
        self.snr
            .as_ref()
            .map(|s| s.0.clone())
            .unwrap_or_else(|| SnrSpec::EVALUATION_SET_DB.to_vec())
    }
}
