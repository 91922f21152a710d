use crate::error::{Error, Result};

/// db4 scaling coefficients (extremal phase), as tabulated by Daubechies.
#[allow(clippy::excessive_precision)]
const DB4: [f64; 8] = [
    0.230_377_813_308_896_500_86,
    0.714_846_570_552_915_647_09,
    0.630_880_767_929_858_907_88,
    -0.027_983_769_416_859_854_211,
    -0.187_034_811_719_093_084_08,
    0.030_841_381_835_560_763_627,
    0.032_883_011_666_885_199_735,
    -0.010_597_401_785_069_032_105,
];

/// Orthonormal two-channel analysis filters.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilterPair {
    /// Low-pass (scaling) filter.
    pub h: Vec<f64>,
    /// High-pass (wavelet) filter, `g[k] = (-1)^k h[len-1-k]`.
    pub g: Vec<f64>,
}

impl WaveletFilterPair {
    pub fn from_scaling(h: Vec<f64>) -> Self {
        let n = h.len();
        let g = (0..n)
            .map(|k| if k % 2 == 0 { h[n - 1 - k] } else { -h[n - 1 - k] })
            .collect();
        Self { h, g }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// Daubechies extremal-phase filters: 2 taps (Haar), 4 (db2) or 8 (db4).
pub fn daubechies_filters(taps: usize) -> Result<WaveletFilterPair> {
    let h = match taps {
        2 => vec![std::f64::consts::FRAC_1_SQRT_2; 2],
        4 => {
            let s3 = 3f64.sqrt();
            let d = 4.0 * 2f64.sqrt();
            vec![(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d]
        }
        8 => DB4.to_vec(),
        other => {
            return Err(Error::invalid(format!(
                "unsupported wavelet length {other} (expected 2, 4 or 8 taps)"
            )))
        }
    };
    Ok(WaveletFilterPair::from_scaling(h))
}
