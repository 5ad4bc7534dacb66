//! Lloyd's k-means with k-means++ seeding over flattened waypoint vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{flatten, unflatten, AnchorSet, PlanTrajectory, PLAN_DIM};
use crate::error::{Error, Result};

pub const MAX_LLOYD_ITERATIONS: usize = 100;

fn sq_dist<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid and its squared distance; lowest index wins ties.
fn nearest<const D: usize>(p: &[f64; D], centroids: &[[f64; D]]) -> (usize, f64) {
    let mut best = (0, sq_dist(p, &centroids[0]));
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist(p, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: first centroid uniform, each further one sampled with
/// probability proportional to its squared distance to the chosen set.
pub fn kmeans_plus_plus_init<const D: usize, R: Rng>(
    data: &[[f64; D]],
    k: usize,
    rng: &mut R,
) -> Vec<[f64; D]> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(data[rng.gen_range(0..data.len())]);
    let mut d2: Vec<f64> = data.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = d2.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // Rounding can run off the end; fall back to the last positive weight.
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.gen_range(0..data.len())
        };
        let c = data[idx];
        for (w, p) in d2.iter_mut().zip(data) {
            *w = w.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansRun<const D: usize> {
    pub centroids: Vec<[f64; D]>,
    pub assignments: Vec<usize>,
    /// Objective after the initial assignment and after every iteration.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
}

/// Lloyd iterations from `init` until the assignment stops changing or
/// `max_iter` updates have run.
///
/// A cluster left empty by an update is re-seeded with the point farthest
/// from its own centroid (lowest index on ties); that point then belongs to
/// the re-seeded cluster.
pub fn lloyd<const D: usize>(
    data: &[[f64; D]],
    init: Vec<[f64; D]>,
    max_iter: usize,
) -> KMeansRun<D> {
    let k = init.len();
    let mut centroids = init;
    let assign_all = |centroids: &[[f64; D]]| -> (Vec<usize>, f64) {
        let mut obj = 0.0;
        let a = data
            .iter()
            .map(|p| {
                let (c, d) = nearest(p, centroids);
                obj += d;
                c
            })
            .collect();
        (a, obj)
    };
    let (mut assignments, obj) = assign_all(&centroids);
    let mut history = vec![obj];
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let mut sums = vec![[0.0; D]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in data.iter().zip(&assignments) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].map(|s| s / counts[c] as f64);
            }
        }
        let mut reseeded = false;
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let mut far = (usize::MAX, -1.0);
            for (i, p) in data.iter().enumerate() {
                let d = sq_dist(p, &centroids[assignments[i]]);
                if d > far.1 && counts[assignments[i]] > 1 {
                    far = (i, d);
                }
            }
            if far.0 == usize::MAX {
                continue;
            }
            counts[assignments[far.0]] -= 1;
            assignments[far.0] = c;
            counts[c] = 1;
            centroids[c] = data[far.0];
            reseeded = true;
        }
        let (next, obj) = assign_all(&centroids);
        history.push(obj);
        let changed = reseeded || next != assignments;
        assignments = next;
        if !changed {
            break;
        }
    }
    KMeansRun {
        centroids,
        assignments,
        objective_history: history,
        iterations,
    }
}

/// Clusters ground-truth futures into `k` anchors with a seeded RNG.
pub fn kmeans_anchors(futures: &[PlanTrajectory], k: usize, seed: u64) -> Result<AnchorSet> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if futures.len() < k {
        return Err(Error::InvalidInput(format!(
            "need at least k = {k} trajectories, got {}",
            futures.len()
        )));
    }
    let data: Vec<[f64; PLAN_DIM]> = futures.iter().map(|f| flatten(&f.waypoints)).collect();
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("trajectory waypoints".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = kmeans_plus_plus_init(&data, k, &mut rng);
    let run = lloyd(&data, init, MAX_LLOYD_ITERATIONS);
    Ok(AnchorSet {
        anchors: run.centroids.iter().map(unflatten).collect(),
        seed,
        objective_history: run.objective_history,
    })
}
