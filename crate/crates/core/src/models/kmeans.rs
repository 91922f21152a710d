use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAX_LLOYD_ITERS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations until the assignment is
/// stable or [`MAX_LLOYD_ITERS`] is reached. Clusters that empty out are
/// re-seeded at the point farthest from its centroid.
pub fn kmeans_init(data: &[&[f64]], k: usize, seed: u64) -> Result<KMeans> {
    if k == 0 {
        return Err(Error::invalid("k-means needs at least one cluster"));
    }
    if data.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} points for {k} clusters",
            data.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = vec![data[rng.gen_range(0..data.len())].to_vec()];
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut idx = data.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    idx = i;
                    break;
                }
                r -= d;
            }
            idx
        } else {
            rng.gen_range(0..data.len())
        };
        centroids.push(data[pick].to_vec());
        let c = centroids.last().unwrap();
        for (d, x) in d2.iter_mut().zip(data) {
            *d = d.min(sq_dist(x, c));
        }
    }

    let dim = data[0].len();
    let mut assignments = vec![usize::MAX; data.len()];
    for _ in 0..MAX_LLOYD_ITERS {
        let mut changed = false;
        for (a, x) in assignments.iter_mut().zip(data) {
            let (best, _) = nearest(x, &centroids);
            if *a != best {
                *a = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, x) in assignments.iter().zip(data) {
            counts[a] += 1;
            sums[a].iter_mut().zip(*x).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let (far, _) = data
                    .iter()
                    .enumerate()
                    .map(|(i, x)| (i, sq_dist(x, &centroids[assignments[i]])))
                    .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
                let from = assignments[far];
                counts[from] -= 1;
                counts[c] = 1;
                assignments[far] = c;
                centroids[c] = data[far].to_vec();
            }
        }
    }
    Ok(KMeans {
        centroids,
        assignments,
    })
}
