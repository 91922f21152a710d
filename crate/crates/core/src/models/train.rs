use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

use super::hmm::{forward, CdhmmModel, GaussianComponent, PreparedEmissions};
use super::kmeans::kmeans_init;

/// Occupancy below which a component is considered dead and re-seeded.
const DEAD_COMPONENT_MASS: f64 = 1e-10;
/// Absolute lower bound on the variance floor, for constant dimensions.
const MIN_VARIANCE: f64 = 1e-12;
/// Self-transition probability of the initial multi-state model.
const INITIAL_SELF_LOOP: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub max_iters: usize,
    /// Stop when `(ll - ll_prev) / |ll_prev|` falls below this.
    pub rel_ll_tol: f64,
    /// Variance floor as a fraction of each dimension's global data variance.
    pub variance_floor_ratio: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            rel_ll_tol: 1e-5,
            variance_floor_ratio: 1e-3,
            seed: 0,
        }
    }
}

impl TrainOptions {
    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0;
        if self.max_iters == 0 || !positive(self.rel_ll_tol) || !positive(self.variance_floor_ratio) {
            return Err(Error::invalid(
                "max_iters, rel_ll_tol and variance_floor_ratio must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: CdhmmModel,
    /// Training-set log-likelihood of the initial model and after every
    /// re-estimation, in order.
    pub log_likelihoods: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Number of components re-seeded after collapsing.
    pub reseeded: usize,
}

/// Maximum-likelihood CDHMM by EM (Baum-Welch) with diagonal covariances.
pub fn em_train(
    sequences: &[FeatureMatrix],
    n_states: usize,
    n_mixtures: usize,
    opts: &TrainOptions,
) -> Result<CdhmmModel> {
    em_train_report(sequences, n_states, n_mixtures, opts).map(|r| r.model)
}

pub fn em_train_report(
    sequences: &[FeatureMatrix],
    n_states: usize,
    n_mixtures: usize,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    opts.validate()?;
    if n_states == 0 || n_mixtures == 0 {
        return Err(Error::invalid("states and mixtures must be positive"));
    }
    let sequences: Vec<&FeatureMatrix> = sequences.iter().filter(|s| !s.is_empty()).collect();
    let first = *sequences
        .first()
        .ok_or_else(|| Error::InsufficientData("no training frames".into()))?;
    for s in &sequences {
        if s.dim() != first.dim() {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                actual: s.dim(),
            });
        }
        if s.params != first.params || s.sample_rate != first.sample_rate {
            return Err(Error::FeatureMismatch {
                expected: first.kind().to_string(),
                actual: s.kind().to_string(),
            });
        }
    }
    let total: usize = sequences.iter().map(|s| s.n_frames()).sum();
    if total < n_states * n_mixtures {
        return Err(Error::InsufficientData(format!(
            "{total} frames for {n_states} states x {n_mixtures} mixtures"
        )));
    }
    let (floor, global_var) = data_variance(&sequences, opts.variance_floor_ratio);
    let mut model = initial_model(&sequences, n_states, n_mixtures, &floor, opts.seed)?;

    let mut stats = e_step(&model, &sequences)?;
    let mut history = vec![stats.log_likelihood];
    let mut converged = false;
    let mut reseeded = 0;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        reseeded += m_step(&mut model, &sequences, &stats, &floor, &global_var);
        stats = e_step(&model, &sequences)?;
        let prev = *history.last().unwrap();
        history.push(stats.log_likelihood);
        if (stats.log_likelihood - prev) / prev.abs().max(f64::MIN_POSITIVE) < opts.rel_ll_tol {
            converged = true;
            break;
        }
    }
    model.validate()?;
    Ok(TrainReport {
        model,
        log_likelihoods: history,
        iterations,
        converged,
        reseeded,
    })
}

/// Per-dimension `(floor, global variance)` of the pooled training data.
fn data_variance(sequences: &[&FeatureMatrix], ratio: f64) -> (Vec<f64>, Vec<f64>) {
    let dim = sequences[0].dim();
    let n: usize = sequences.iter().map(|s| s.n_frames()).sum();
    let mut mean = vec![0.0; dim];
    for row in sequences.iter().flat_map(|s| s.rows()) {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; dim];
    for row in sequences.iter().flat_map(|s| s.rows()) {
        for ((acc, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|v| *v = (*v / n as f64).max(MIN_VARIANCE));
    let floor = var.iter().map(|v| (ratio * v).max(MIN_VARIANCE)).collect();
    (floor, var)
}

fn component_from(points: &[&[f64]], weight: f64, floor: &[f64]) -> GaussianComponent {
    let dim = floor.len();
    let n = points.len().max(1) as f64;
    let mut mean = vec![0.0; dim];
    for p in points {
        mean.iter_mut().zip(*p).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut variance = vec![0.0; dim];
    for p in points {
        for ((acc, v), m) in variance.iter_mut().zip(*p).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    variance
        .iter_mut()
        .zip(floor)
        .for_each(|(v, f)| *v = (*v / n).max(*f));
    GaussianComponent {
        weight,
        mean,
        variance,
    }
}

/// Uniform segmentation of every sequence into `n_states` contiguous
/// pieces, k-means per state, ergodic transitions with a heavy self-loop.
fn initial_model(
    sequences: &[&FeatureMatrix],
    n_states: usize,
    n_mixtures: usize,
    floor: &[f64],
    seed: u64,
) -> Result<CdhmmModel> {
    let mut per_state: Vec<Vec<&[f64]>> = vec![Vec::new(); n_states];
    for s in sequences {
        let t_len = s.n_frames();
        for (t, row) in s.rows().enumerate() {
            per_state[(t * n_states / t_len).min(n_states - 1)].push(row);
        }
    }
    let mut states = Vec::with_capacity(n_states);
    for (j, points) in per_state.iter().enumerate() {
        if points.len() < n_mixtures {
            return Err(Error::InsufficientData(format!(
                "state {j} receives {} frames for {n_mixtures} mixtures",
                points.len()
            )));
        }
        let km = kmeans_init(points, n_mixtures, seed.wrapping_add(j as u64))?;
        let mut clusters: Vec<Vec<&[f64]>> = vec![Vec::new(); n_mixtures];
        for (&a, p) in km.assignments.iter().zip(points) {
            clusters[a].push(p);
        }
        let counts: Vec<f64> = clusters.iter().map(|c| c.len().max(1) as f64).collect();
        let total: f64 = counts.iter().sum();
        let mix = clusters
            .iter()
            .zip(&km.centroids)
            .zip(&counts)
            .map(|((members, centroid), &c)| {
                let mut comp = if members.is_empty() {
                    component_from(&[centroid.as_slice()], 0.0, floor)
                } else {
                    component_from(members, 0.0, floor)
                };
                comp.weight = c / total;
                comp
            })
            .collect();
        states.push(mix);
    }
    let transitions = (0..n_states)
        .map(|i| {
            (0..n_states)
                .map(|j| match (n_states, i == j) {
                    (1, _) => 1.0,
                    (_, true) => INITIAL_SELF_LOOP,
                    (_, false) => (1.0 - INITIAL_SELF_LOOP) / (n_states - 1) as f64,
                })
                .collect()
        })
        .collect();
    Ok(CdhmmModel {
        n_states,
        n_mixtures,
        feature_dim: floor.len(),
        transitions,
        initial: vec![1.0 / n_states as f64; n_states],
        states,
        feature_params: sequences[0].params.clone(),
        sample_rate: sequences[0].sample_rate,
    })
}

/// Posteriors of one sequence.
struct SequenceStats {
    /// `gamma[t][j][l]`: state-and-component occupancy.
    gamma: Vec<Vec<Vec<f64>>>,
    /// `sum_t xi_t(i, j)`.
    xi: Vec<Vec<f64>>,
    /// `ln p(o_t | o_1..o_{t-1})`, used to pick re-seeding points.
    frame_fit: Vec<f64>,
    log_likelihood: f64,
}

struct Stats {
    per_seq: Vec<SequenceStats>,
    log_likelihood: f64,
}

fn e_step(model: &CdhmmModel, sequences: &[&FeatureMatrix]) -> Result<Stats> {
    let prep = model.prepared();
    let per_seq: Vec<SequenceStats> = sequences
        .par_iter()
        .map(|s| sequence_stats(model, &prep, s))
        .collect();
    // fixed-order reduction keeps training reproducible
    let log_likelihood = per_seq.iter().map(|s| s.log_likelihood).sum::<f64>();
    if !log_likelihood.is_finite() {
        return Err(Error::NonFinite("training"));
    }
    Ok(Stats {
        per_seq,
        log_likelihood,
    })
}

fn sequence_stats(model: &CdhmmModel, prep: &PreparedEmissions, obs: &FeatureMatrix) -> SequenceStats {
    let n = model.n_states;
    let t_len = obs.n_frames();
    let pass = forward(model, prep, obs, true);
    let mut beta = vec![vec![1.0; n]; t_len];
    for t in (0..t_len.saturating_sub(1)).rev() {
        let c = pass.scale[t + 1];
        for i in 0..n {
            let s: f64 = (0..n)
                .map(|j| model.transitions[i][j] * pass.emission[t + 1][j] * beta[t + 1][j])
                .sum();
            beta[t][i] = if c > 0.0 { s / c } else { 0.0 };
        }
    }
    let mut xi = vec![vec![0.0; n]; n];
    for t in 0..t_len.saturating_sub(1) {
        let c = pass.scale[t + 1];
        if c <= 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                xi[i][j] += pass.alpha[t][i]
                    * model.transitions[i][j]
                    * pass.emission[t + 1][j]
                    * beta[t + 1][j]
                    / c;
            }
        }
    }
    let mut gamma = Vec::with_capacity(t_len);
    let mut frame_fit = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let occ: Vec<f64> = (0..n).map(|j| pass.alpha[t][j] * beta[t][j]).collect();
        let norm: f64 = occ.iter().sum();
        gamma.push(
            (0..n)
                .map(|j| {
                    let g = if norm > 0.0 { occ[j] / norm } else { 0.0 };
                    pass.log_resp[t][j].iter().map(|lr| g * lr.exp()).collect()
                })
                .collect(),
        );
        frame_fit.push(pass.frame_log_lik[t]);
    }
    SequenceStats {
        gamma,
        xi,
        frame_fit,
        log_likelihood: pass.log_likelihood,
    }
}

/// Re-estimates the model in place; returns the number of re-seeded components.
fn m_step(
    model: &mut CdhmmModel,
    sequences: &[&FeatureMatrix],
    stats: &Stats,
    floor: &[f64],
    global_var: &[f64],
) -> usize {
    let n = model.n_states;
    let m = model.n_mixtures;
    let dim = model.feature_dim;

    if n > 1 {
        let mut init = vec![0.0; n];
        let mut trans = vec![vec![0.0; n]; n];
        for s in &stats.per_seq {
            for j in 0..n {
                init[j] += s.gamma[0][j].iter().sum::<f64>();
            }
            for i in 0..n {
                for j in 0..n {
                    trans[i][j] += s.xi[i][j];
                }
            }
        }
        let z: f64 = init.iter().sum();
        model.initial = init.iter().map(|v| v / z).collect();
        for (i, row) in trans.iter().enumerate() {
            let z: f64 = row.iter().sum();
            if z > 0.0 {
                model.transitions[i] = row.iter().map(|v| v / z).collect();
            }
        }
    }

    let mut occ = vec![vec![0.0; m]; n];
    let mut sum = vec![vec![vec![0.0; dim]; m]; n];
    for (s, obs) in stats.per_seq.iter().zip(sequences) {
        for (g_t, x) in s.gamma.iter().zip(obs.rows()) {
            for j in 0..n {
                for l in 0..m {
                    let g = g_t[j][l];
                    occ[j][l] += g;
                    sum[j][l].iter_mut().zip(x).for_each(|(acc, v)| *acc += g * v);
                }
            }
        }
    }
    let means: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|j| {
            (0..m)
                .map(|l| {
                    let o = occ[j][l].max(f64::MIN_POSITIVE);
                    sum[j][l].iter().map(|v| v / o).collect()
                })
                .collect()
        })
        .collect();
    let mut sq = vec![vec![vec![0.0; dim]; m]; n];
    for (s, obs) in stats.per_seq.iter().zip(sequences) {
        for (g_t, x) in s.gamma.iter().zip(obs.rows()) {
            for j in 0..n {
                for l in 0..m {
                    let g = g_t[j][l];
                    for ((acc, v), mu) in sq[j][l].iter_mut().zip(x).zip(&means[j][l]) {
                        *acc += g * (v - mu) * (v - mu);
                    }
                }
            }
        }
    }

    let mut reseed_queue = worst_fit_frames(stats, sequences);
    let mut reseeded = 0;
    for j in 0..n {
        let state_occ: f64 = occ[j].iter().sum();
        for l in 0..m {
            let comp = &mut model.states[j][l];
            if occ[j][l] < DEAD_COMPONENT_MASS {
                let x = reseed_queue.pop().unwrap_or_else(|| means[j][l].clone());
                comp.mean = x;
                comp.variance = global_var.to_vec();
                comp.weight = DEAD_COMPONENT_MASS.max(1e-3 / m as f64);
                reseeded += 1;
                continue;
            }
            comp.mean = means[j][l].clone();
            comp.variance = sq[j][l]
                .iter()
                .zip(floor)
                .map(|(v, f)| (v / occ[j][l]).max(*f))
                .collect();
            comp.weight = occ[j][l] / state_occ;
        }
        let z: f64 = model.states[j].iter().map(|c| c.weight).sum();
        model.states[j].iter_mut().for_each(|c| c.weight /= z);
    }
    reseeded
}

/// Frames ordered so that `pop()` yields the worst-modelled frame first.
fn worst_fit_frames(stats: &Stats, sequences: &[&FeatureMatrix]) -> Vec<Vec<f64>> {
    let mut scored: Vec<(f64, usize, usize)> = stats
        .per_seq
        .iter()
        .enumerate()
        .flat_map(|(si, s)| s.frame_fit.iter().enumerate().map(move |(t, &f)| (f, si, t)))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let keep = scored.len().min(64);
    scored[scored.len() - keep..]
        .iter()
        .map(|&(_, si, t)| sequences[si].row(t).to_vec())
        .collect()
}
