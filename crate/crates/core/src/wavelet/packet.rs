use crate::error::{Error, Result};

use super::filters::WaveletFilterPair;

/// One analysis level with periodic extension:
/// `a[k] = sum_n h[n] x[(2k+n) mod len]`, `d[k]` likewise with `g`.
pub fn dwt_step(x: &[f64], filters: &WaveletFilterPair) -> Result<(Vec<f64>, Vec<f64>)> {
    let len = x.len();
    if !len.is_multiple_of(2) {
        return Err(Error::invalid(format!("DWT input length {len} is odd")));
    }
    if len < filters.len() {
        return Err(Error::invalid(format!(
            "DWT input length {len} shorter than {}-tap filter",
            filters.len()
        )));
    }
    let half = len / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for (n, (h, g)) in filters.h.iter().zip(&filters.g).enumerate() {
            let v = x[(2 * k + n) % len];
            a += h * v;
            d += g * v;
        }
        approx[k] = a;
        detail[k] = d;
    }
    Ok((approx, detail))
}

/// Inverse of [`dwt_step`].
pub fn idwt_step(approx: &[f64], detail: &[f64], filters: &WaveletFilterPair) -> Result<Vec<f64>> {
    if approx.len() != detail.len() {
        return Err(Error::LengthMismatch {
            expected: approx.len(),
            actual: detail.len(),
        });
    }
    let len = 2 * approx.len();
    if len < filters.len() {
        return Err(Error::invalid(format!(
            "IDWT output length {len} shorter than {}-tap filter",
            filters.len()
        )));
    }
    let mut out = vec![0.0; len];
    for k in 0..approx.len() {
        for (n, (h, g)) in filters.h.iter().zip(&filters.g).enumerate() {
            out[(2 * k + n) % len] += h * approx[k] + g * detail[k];
        }
    }
    Ok(out)
}

/// Full wavelet packet decomposition: every node is split at every level.
#[derive(Debug, Clone, PartialEq)]
pub struct WpTree {
    pub depth: u32,
    /// `2^depth` leaves in frequency order; leaf 0 is the lowest band.
    pub leaves: Vec<Vec<f64>>,
}

impl WpTree {
    pub fn leaf_len(&self) -> usize {
        self.leaves.first().map_or(0, Vec::len)
    }

    pub fn energy(&self) -> f64 {
        self.leaves.iter().flatten().map(|c| c * c).sum()
    }
}

/// Binary-reflected Gray code. Frequency band `f` sits at natural (Paley)
/// position `gray(f)`, since each high-pass-and-decimate flips the band.
pub fn gray(f: usize) -> usize {
    f ^ (f >> 1)
}

pub fn wpt_full(frame: &[f64], filters: &WaveletFilterPair, depth: u32) -> Result<WpTree> {
    let blocks = 1usize << depth;
    if frame.is_empty() || !frame.len().is_multiple_of(blocks) {
        return Err(Error::invalid(format!(
            "frame length {} not divisible by 2^{depth}",
            frame.len()
        )));
    }
    let mut nodes = vec![frame.to_vec()];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(nodes.len() * 2);
        for node in &nodes {
            let (a, d) = dwt_step(node, filters)?;
            next.push(a);
            next.push(d);
        }
        nodes = next;
    }
    let mut natural: Vec<Option<Vec<f64>>> = nodes.into_iter().map(Some).collect();
    let leaves = (0..blocks)
        .map(|f| natural[gray(f)].take().expect("gray code is a permutation"))
        .collect();
    Ok(WpTree { depth, leaves })
}

/// Synthesis counterpart of [`wpt_full`].
pub fn wpt_inverse(tree: &WpTree, filters: &WaveletFilterPair) -> Result<Vec<f64>> {
    let blocks = 1usize << tree.depth;
    if tree.leaves.len() != blocks {
        return Err(Error::LengthMismatch {
            expected: blocks,
            actual: tree.leaves.len(),
        });
    }
    let mut nodes = vec![Vec::new(); blocks];
    for (f, leaf) in tree.leaves.iter().enumerate() {
        nodes[gray(f)] = leaf.clone();
    }
    for _ in 0..tree.depth {
        nodes = nodes
            .chunks_exact(2)
            .map(|pair| idwt_step(&pair[0], &pair[1], filters))
            .collect::<Result<_>>()?;
    }
    Ok(nodes.pop().unwrap_or_default())
}

/// Mean-square coefficient energy of each of the `n_bands` lowest leaves.
pub fn subband_energies(tree: &WpTree, n_bands: usize) -> Result<Vec<f64>> {
    if n_bands == 0 || n_bands > tree.leaves.len() {
        return Err(Error::invalid(format!(
            "{n_bands} bands requested from {} leaves",
            tree.leaves.len()
        )));
    }
    Ok(tree.leaves[..n_bands]
        .iter()
        .map(|leaf| leaf.iter().map(|c| c * c).sum::<f64>() / leaf.len() as f64)
        .collect())
}
