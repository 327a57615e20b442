use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sq_euclidean, ClusterAssignment};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Convergence threshold on the summed squared centroid shift, relative
    /// to the mean per-feature variance of the data.
    pub tol: f64,
    pub seed: u64,
}

impl KmeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KmeansConfig {
            k,
            max_iter: 300,
            tol: 1e-4,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KmeansResult {
    pub assignment: ClusterAssignment,
    /// One row per label of `assignment`.
    pub centroids: Array2<f64>,
    pub inertia: f64,
    /// Inertia after every assignment step.
    pub inertia_trace: Vec<f64>,
}

/// Lloyd's algorithm from one greedy k-means++ seeding.
pub fn kmeans(x: &Array2<f64>, cfg: &KmeansConfig) -> Result<KmeansResult> {
    let (n, d) = x.dim();
    if cfg.k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if cfg.k > n {
        return Err(Error::invalid(format!("k = {} exceeds {n} points", cfg.k)));
    }
    if !(cfg.tol >= 0.0) {
        return Err(Error::invalid("tol must be non-negative"));
    }
    let x = x.as_standard_layout();
    let x = x.view();
    let rows: Vec<&[f64]> = x.rows().into_iter().map(|r| r.to_slice().expect("standard layout")).collect();
    let mut rng = rng_from_seed(cfg.seed);
    let mut centroids = plus_plus_init(&rows, cfg.k, &mut rng);

    let tol = cfg.tol * mean_variance(&x);
    let mut labels = vec![0usize; n];
    let mut trace = Vec::new();
    for iter in 0..cfg.max_iter.max(1) {
        let mut inertia = 0.0;
        let mut changed = false;
        for (i, row) in rows.iter().enumerate() {
            let (best, dist) = nearest(row, &centroids);
            if best != labels[i] {
                changed = true;
            }
            labels[i] = best;
            inertia += dist;
        }
        trace.push(inertia);
        if iter > 0 && !changed {
            break;
        }

        let mut sums = vec![vec![0.0; d]; cfg.k];
        let mut counts = vec![0usize; cfg.k];
        for (row, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(row.iter()) {
                *s += v;
            }
        }
        let mut shift = 0.0;
        for c in 0..cfg.k {
            let new = if counts[c] == 0 {
                // Empty cluster: take the point farthest from its centroid.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_euclidean(rows[a], &centroids[labels[a]])
                            .total_cmp(&sq_euclidean(rows[b], &centroids[labels[b]]))
                            .then(b.cmp(&a))
                    })
                    .expect("n >= 1");
                counts[labels[far]] = counts[labels[far]].saturating_sub(1);
                labels[far] = c;
                rows[far].to_vec()
            } else {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            };
            shift += sq_euclidean(&new, &centroids[c]);
            centroids[c] = new;
        }
        if shift <= tol {
            let inertia = rows.iter().map(|r| nearest(r, &centroids).1).sum();
            trace.push(inertia);
            for (i, row) in rows.iter().enumerate() {
                labels[i] = nearest(row, &centroids).0;
            }
            break;
        }
    }

    let assignment = ClusterAssignment::from_raw(&labels.iter().map(|&l| Some(l)).collect::<Vec<_>>());
    let mut ordered = Array2::zeros((assignment.n_clusters(), d));
    for (&orig, &dense) in labels.iter().zip(assignment.labels()) {
        for (j, v) in centroids[orig].iter().enumerate() {
            ordered[[dense as usize, j]] = *v;
        }
    }
    let inertia = rows
        .iter()
        .zip(assignment.labels())
        .map(|(r, &l)| sq_euclidean(r, ordered.row(l as usize).as_slice().expect("row")))
        .sum();
    Ok(KmeansResult {
        assignment,
        centroids: ordered,
        inertia,
        inertia_trace: trace,
    })
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (c, cen) in centroids.iter().enumerate() {
        let d = sq_euclidean(row, cen);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn mean_variance(x: &ndarray::ArrayView2<'_, f64>) -> f64 {
    let n = x.nrows() as f64;
    if x.ncols() == 0 || n == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for col in x.columns() {
        let mean = col.sum() / n;
        total += col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    }
    total / x.ncols() as f64
}

/// One D²-weighted draw; `None` when every weight is zero.
fn d2_sample<R: Rng>(d2: &[f64], total: f64, rng: &mut R) -> Option<usize> {
    if total <= 0.0 {
        return None;
    }
    let mut target = rng.random::<f64>() * total;
    for (i, &w) in d2.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        if target < w {
            return Some(i);
        }
        target -= w;
    }
    d2.iter().rposition(|&w| w > 0.0)
}

/// Greedy k-means++ seeding: each step draws `3 (2 + ln k)` D²-weighted
/// candidates and keeps the one that lowers the potential most. With
/// near-equidistant clusters (disjoint vocabularies under tf-idf) the usual
/// `2 + ln k` still often seeds two centers in one cluster. Falls back
/// to the first unused row when every remaining point coincides with a
/// chosen center.
fn plus_plus_init<R: Rng>(rows: &[&[f64]], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = rows.len();
    let trials = 3 * (2 + (k as f64).ln() as usize);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_euclidean(r, rows[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for _ in 0..trials {
            let Some(c) = d2_sample(&d2, total, rng) else { break };
            let next: Vec<f64> = rows.iter().zip(&d2).map(|(r, &d)| d.min(sq_euclidean(r, rows[c]))).collect();
            let potential: f64 = next.iter().sum();
            if best.as_ref().map_or(true, |b| potential < b.1) {
                best = Some((c, potential, next));
            }
        }
        match best {
            Some((c, _, next)) => {
                chosen.push(c);
                d2 = next;
            }
            None => {
                let c = (0..n).find(|i| !chosen.contains(i)).expect("k <= n");
                chosen.push(c);
            }
        }
    }
    chosen.into_iter().map(|i| rows[i].to_vec()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn separated_pairs() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        let r = kmeans(&x, &KmeansConfig::new(2, 1)).unwrap();
        assert_eq!(r.assignment.labels(), &[0, 0, 1, 1]);
        assert_eq!(r.centroids, array![[0.0, 0.5], [10.0, 0.5]]);
        assert_eq!(r.inertia, 1.0);
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let x = array![[0.0, 0.0], [1.0, 5.0], [3.0, -2.0], [7.0, 7.0], [2.0, 2.0]];
        let r = kmeans(&x, &KmeansConfig::new(5, 9)).unwrap();
        assert_eq!(r.assignment.n_clusters(), 5);
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn k_too_large() {
        let x = array![[0.0], [1.0]];
        assert!(kmeans(&x, &KmeansConfig::new(3, 0)).is_err());
    }

    #[test]
    fn duplicate_points_k_exceeds_distinct() {
        let x = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]];
        let r = kmeans(&x, &KmeansConfig::new(2, 0)).unwrap();
        assert_eq!(r.inertia, 0.0);
    }
}
