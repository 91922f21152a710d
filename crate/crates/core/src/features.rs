//! Feature matrices, extraction parameters and their on-disk formats.
//!
//! Two persisted forms are supported, both exact round-trips:
//!
//! * Text (`.csv`): three `#` header lines followed by a column-name row
//!   and one comma-separated row per frame.
//!
//!   ```text
//!   # wpmfc-features v1
//!   # kind=wpmfc dim=35 frames=98 sample_rate=48000
//!   # params={"kind":"wpmfc","frontend":{...},...}
//!   c1,c2,...,c35
//!   -1.25,0.5,...
//!   ```
//!
//! * Binary (`.bin`), all integers little-endian:
//!   magic `WPMFCFT1` (8 bytes), `u32` dim, `u64` frames, `u32` sample rate,
//!   `u32` length of the params JSON, the params JSON (UTF-8), then
//!   `frames * dim` row-major `f64` values.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::{MelScale, PRE_EMPHASIS};

const TEXT_MAGIC: &str = "# wpmfc-features v1";
const BINARY_MAGIC: &[u8; 8] = b"WPMFCFT1";

/// Framing and mel parameters shared by both feature kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontendParams {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub pre_emphasis: f64,
    pub n_mel_filters: usize,
    pub mel_scale: MelScale,
}

impl Default for FrontendParams {
    fn default() -> Self {
        Self {
            frame_ms: 25.0,
            hop_ms: 10.0,
            pre_emphasis: PRE_EMPHASIS,
            n_mel_filters: 40,
            mel_scale: MelScale::Htk,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfccParams {
    pub frontend: FrontendParams,
    pub n_coeffs: usize,
    /// Emit coefficients `0..n_coeffs` instead of `1..=n_coeffs`.
    pub include_c0: bool,
}

impl Default for MfccParams {
    fn default() -> Self {
        Self {
            frontend: FrontendParams::default(),
            n_coeffs: 13,
            include_c0: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WpmfcParams {
    pub frontend: FrontendParams,
    /// Daubechies filter length: 2 (Haar), 4 (db2) or 8 (db4).
    pub wavelet_taps: usize,
    pub depth: u32,
    /// Number of lowest-frequency packet leaves kept; also the cepstrum length.
    pub n_bands: usize,
}

impl Default for WpmfcParams {
    fn default() -> Self {
        Self {
            frontend: FrontendParams::default(),
            wavelet_taps: 8,
            depth: 7,
            n_bands: 35,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Mfcc,
    Wpmfc,
    /// Features not produced by this crate's extractors (tests, imports).
    Generic,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Mfcc => "mfcc",
            FeatureKind::Wpmfc => "wpmfc",
            FeatureKind::Generic => "generic",
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mfcc" => Ok(FeatureKind::Mfcc),
            "wpmfc" | "wp-mfc" => Ok(FeatureKind::Wpmfc),
            "generic" => Ok(FeatureKind::Generic),
            other => Err(Error::invalid(format!("unknown feature kind '{other}'"))),
        }
    }
}

/// Everything needed to reproduce an extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureParams {
    Mfcc(MfccParams),
    Wpmfc(WpmfcParams),
    Generic,
}

impl FeatureParams {
    pub fn kind(&self) -> FeatureKind {
        match self {
            FeatureParams::Mfcc(_) => FeatureKind::Mfcc,
            FeatureParams::Wpmfc(_) => FeatureKind::Wpmfc,
            FeatureParams::Generic => FeatureKind::Generic,
        }
    }

    /// Feature dimension produced by these parameters, if fixed.
    pub fn dim(&self) -> Option<usize> {
        match self {
            FeatureParams::Mfcc(p) => Some(p.n_coeffs),
            FeatureParams::Wpmfc(p) => Some(p.n_bands),
            FeatureParams::Generic => None,
        }
    }

    pub fn default_for(kind: FeatureKind) -> Self {
        match kind {
            FeatureKind::Mfcc => FeatureParams::Mfcc(MfccParams::default()),
            FeatureKind::Wpmfc => FeatureParams::Wpmfc(WpmfcParams::default()),
            FeatureKind::Generic => FeatureParams::Generic,
        }
    }

    fn to_json(&self) -> String {
        serde_json::to_string(self).expect("params serialize")
    }
}

/// Per-frame feature vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub params: FeatureParams,
    pub sample_rate: u32,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(params: FeatureParams, sample_rate: u32, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Format(format!(
                "{} values do not form rows of dimension {dim}",
                data.len()
            )));
        }
        if let Some(expected) = params.dim() {
            if expected != dim {
                return Err(Error::DimensionMismatch {
                    expected,
                    actual: dim,
                });
            }
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "non-finite feature value at row {}, column {}",
                i / dim,
                i % dim
            )));
        }
        Ok(Self {
            params,
            sample_rate,
            dim,
            data,
        })
    }

    /// Builds an untagged matrix from rows, mainly for tests and imports.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("ragged feature rows"));
        }
        Self::new(FeatureParams::Generic, 0, dim, rows.concat())
    }

    pub fn kind(&self) -> FeatureKind {
        self.params.kind()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_frames(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Row-wise concatenation of matrices sharing params and dimension.
    pub fn concat(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InsufficientData("nothing to concatenate".into()))?;
        let mut data = Vec::new();
        for p in parts {
            if p.dim != first.dim {
                return Err(Error::DimensionMismatch {
                    expected: first.dim,
                    actual: p.dim,
                });
            }
            if p.params != first.params {
                return Err(Error::FeatureMismatch {
                    expected: first.params.to_json(),
                    actual: p.params.to_json(),
                });
            }
            data.extend_from_slice(&p.data);
        }
        FeatureMatrix::new(first.params.clone(), first.sample_rate, first.dim, data)
    }

    fn column_names(&self) -> Vec<String> {
        let offset = match &self.params {
            FeatureParams::Mfcc(p) if p.include_c0 => 0,
            _ => 1,
        };
        (0..self.dim).map(|i| format!("c{}", i + offset)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{TEXT_MAGIC}").unwrap();
        writeln!(
            out,
            "# kind={} dim={} frames={} sample_rate={}",
            self.kind(),
            self.dim,
            self.n_frames(),
            self.sample_rate
        )
        .unwrap();
        writeln!(out, "# params={}", self.params.to_json()).unwrap();
        writeln!(out, "{}", self.column_names().join(",")).unwrap();
        for row in self.rows() {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                first = false;
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<FeatureMatrix> {
        let mut lines = text.lines();
        if lines.next() != Some(TEXT_MAGIC) {
            return Err(Error::Format("missing feature-file header".into()));
        }
        let summary = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| Error::Format("missing summary line".into()))?;
        let mut dim = None;
        let mut frames = None;
        let mut sample_rate = None;
        let mut kind = None;
        for field in summary.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad summary field '{field}'")))?;
            let num = || v.parse::<u64>().map_err(|_| Error::Format(format!("bad {k}")));
            match k {
                "kind" => kind = Some(v.parse::<FeatureKind>()?),
                "dim" => dim = Some(num()? as usize),
                "frames" => frames = Some(num()? as usize),
                "sample_rate" => sample_rate = Some(num()? as u32),
                _ => {}
            }
        }
        let params_line = lines
            .next()
            .and_then(|l| l.strip_prefix("# params="))
            .ok_or_else(|| Error::Format("missing params line".into()))?;
        let params: FeatureParams = serde_json::from_str(params_line)?;
        let (dim, frames, sample_rate) = match (dim, frames, sample_rate) {
            (Some(d), Some(f), Some(s)) => (d, f, s),
            _ => return Err(Error::Format("incomplete summary line".into())),
        };
        if kind != Some(params.kind()) {
            return Err(Error::Format("kind tag disagrees with params".into()));
        }
        lines
            .next()
            .ok_or_else(|| Error::Format("missing column header".into()))?;
        let mut data = Vec::with_capacity(dim * frames);
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let before = data.len();
            for tok in line.split(',') {
                data.push(
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Format(format!("row {i}: bad value '{tok}'")))?,
                );
            }
            if data.len() - before != dim {
                return Err(Error::Format(format!("row {i}: expected {dim} values")));
            }
        }
        if data.len() != dim * frames {
            return Err(Error::Format(format!(
                "expected {frames} rows, found {}",
                data.len() / dim.max(1)
            )));
        }
        FeatureMatrix::new(params, sample_rate, dim, data)
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let params = self.params.to_json();
        let mut out = Vec::with_capacity(28 + params.len() + self.data.len() * 8);
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_frames() as u64).to_le_bytes());
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        out.extend_from_slice(&(params.len() as u32).to_le_bytes());
        out.extend_from_slice(params.as_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_binary(mut bytes: &[u8]) -> Result<FeatureMatrix> {
        let short = || Error::Format("truncated binary feature file".into());
        let mut magic = [0u8; 8];
        bytes.read_exact(&mut magic).map_err(|_| short())?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format("bad binary feature magic".into()));
        }
        let mut u32buf = [0u8; 4];
        let mut u64buf = [0u8; 8];
        bytes.read_exact(&mut u32buf).map_err(|_| short())?;
        let dim = u32::from_le_bytes(u32buf) as usize;
        bytes.read_exact(&mut u64buf).map_err(|_| short())?;
        let frames = u64::from_le_bytes(u64buf) as usize;
        bytes.read_exact(&mut u32buf).map_err(|_| short())?;
        let sample_rate = u32::from_le_bytes(u32buf);
        bytes.read_exact(&mut u32buf).map_err(|_| short())?;
        let plen = u32::from_le_bytes(u32buf) as usize;
        if bytes.len() < plen {
            return Err(short());
        }
        let (pjson, rest) = bytes.split_at(plen);
        let params: FeatureParams = serde_json::from_slice(pjson)?;
        let n = dim
            .checked_mul(frames)
            .ok_or_else(|| Error::Format("size overflow".into()))?;
        if rest.len() != n * 8 {
            return Err(Error::Format(format!(
                "expected {} payload bytes, found {}",
                n * 8,
                rest.len()
            )));
        }
        let data = rest
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        FeatureMatrix::new(params, sample_rate, dim, data)
    }

    /// Writes text for `.csv`/`.txt` paths and binary otherwise.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = if is_text_path(path) {
            self.to_text().into_bytes()
        } else {
            self.to_binary()
        };
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(BINARY_MAGIC) {
            FeatureMatrix::from_binary(&bytes)
        } else {
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::Format(format!("{}: not UTF-8 text", path.display())))?;
            FeatureMatrix::from_text(&text)
        }
    }
}

fn is_text_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("csv") | Some("txt")
    )
}
