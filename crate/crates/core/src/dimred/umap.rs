//! UMAP embedding with exact nearest neighbors and seeded random initialization.
//!
//! The layout is single-threaded so a fixed seed reproduces the output bit
//! for bit.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

const BISECTION_ITERS: usize = 64;
const SMOOTH_K_TOLERANCE: f64 = 1e-5;
const MIN_K_DIST_SCALE: f64 = 1e-3;
const NEGATIVE_SAMPLE_RATE: f64 = 5.0;
const SPREAD: f64 = 1.0;
const INIT_RANGE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UmapConfig {
    pub n_neighbors: usize,
    pub n_components: usize,
    pub min_dist: f64,
    pub n_epochs: usize,
    pub seed: u64,
}

impl Default for UmapConfig {
    fn default() -> Self {
        UmapConfig {
            n_neighbors: 15,
            n_components: 5,
            min_dist: 0.1,
            n_epochs: 200,
            seed: 0,
        }
    }
}

impl UmapConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if self.n_neighbors < 2 {
            return Err(Error::invalid("n_neighbors must be at least 2"));
        }
        if self.n_neighbors >= n {
            return Err(Error::invalid(format!(
                "n_neighbors {} must be below the point count {n}",
                self.n_neighbors
            )));
        }
        if self.n_components < 2 {
            return Err(Error::invalid("n_components must be at least 2"));
        }
        if !(self.min_dist >= 0.0) || self.n_epochs == 0 {
            return Err(Error::invalid("min_dist must be >= 0 and n_epochs >= 1"));
        }
        Ok(())
    }
}

/// Symmetric fuzzy membership graph as a sorted edge list (both directions stored).
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl FuzzyGraph {
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.edges
            .binary_search_by(|e| (e.0, e.1).cmp(&(i, j)))
            .map(|k| self.edges[k].2)
            .unwrap_or(0.0)
    }
}

fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Exact k nearest neighbors of every point, the point itself first.
/// Ties resolve by index.
pub fn knn(x: &Array2<f64>, k: usize) -> (Vec<Vec<usize>>, Vec<Vec<f64>>) {
    let n = x.nrows();
    let mut idx = Vec::with_capacity(n);
    let mut dst = Vec::with_capacity(n);
    for i in 0..n {
        let mut d: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (euclidean(x.row(i), x.row(j)), j))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.truncate(k.saturating_sub(1));
        let mut ii = vec![i];
        let mut dd = vec![0.0];
        for (dist, j) in d {
            ii.push(j);
            dd.push(dist);
        }
        idx.push(ii);
        dst.push(dd);
    }
    (idx, dst)
}

/// Per-point `(sigma, rho)` calibration.
///
/// `rho` is the distance to the nearest other point; `sigma` is found by
/// bisection so that `sum_j exp(-max(0, d_ij - rho) / sigma) = log2(k)` over
/// the non-self neighbors.
pub fn smooth_knn_dist(dists: &[Vec<f64>], k: usize) -> (Vec<f64>, Vec<f64>) {
    let target = (k as f64).log2();
    let mean_all = {
        let (s, c) = dists
            .iter()
            .flat_map(|d| d.iter().skip(1))
            .fold((0.0, 0usize), |(s, c), &v| (s + v, c + 1));
        if c == 0 { 0.0 } else { s / c as f64 }
    };
    let mut sigmas = Vec::with_capacity(dists.len());
    let mut rhos = Vec::with_capacity(dists.len());
    for d in dists {
        let others = &d[1..];
        let rho = others.first().copied().unwrap_or(0.0);
        let (mut lo, mut hi, mut mid) = (0.0f64, f64::INFINITY, 1.0f64);
        for _ in 0..BISECTION_ITERS {
            let psum: f64 = others
                .iter()
                .map(|&dij| {
                    let r = dij - rho;
                    if r > 0.0 { (-r / mid).exp() } else { 1.0 }
                })
                .sum();
            if (psum - target).abs() < SMOOTH_K_TOLERANCE {
                break;
            }
            if psum > target {
                hi = mid;
                mid = (lo + hi) / 2.0;
            } else {
                lo = mid;
                if hi == f64::INFINITY {
                    mid *= 2.0;
                } else {
                    mid = (lo + hi) / 2.0;
                }
            }
        }
        let mean_i = if others.is_empty() {
            0.0
        } else {
            others.iter().sum::<f64>() / others.len() as f64
        };
        let floor = if rho > 0.0 { mean_i } else { mean_all };
        if mid < MIN_K_DIST_SCALE * floor {
            mid = MIN_K_DIST_SCALE * floor;
        }
        sigmas.push(mid);
        rhos.push(rho);
    }
    (sigmas, rhos)
}

/// Directed memberships combined by fuzzy union `a + b - ab`.
pub fn fuzzy_simplicial_set(x: &Array2<f64>, n_neighbors: usize) -> FuzzyGraph {
    let n = x.nrows();
    let (idx, dst) = knn(x, n_neighbors);
    let (sigmas, rhos) = smooth_knn_dist(&dst, n_neighbors);
    let mut directed: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..n {
        for (&j, &d) in idx[i].iter().zip(&dst[i]).skip(1) {
            let w = if d - rhos[i] <= 0.0 || sigmas[i] == 0.0 {
                1.0
            } else {
                (-(d - rhos[i]) / sigmas[i]).exp()
            };
            directed.insert((i, j), w);
        }
    }
    let mut sym: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&(i, j), &a) in &directed {
        let b = directed.get(&(j, i)).copied().unwrap_or(0.0);
        let u = a + b - a * b;
        sym.insert((i, j), u);
        sym.insert((j, i), u);
    }
    FuzzyGraph {
        n,
        edges: sym.into_iter().filter(|e| e.1 > 0.0).map(|((i, j), w)| (i, j, w)).collect(),
    }
}

/// Fits `(a, b)` of `1 / (1 + a d^(2b))` to the offset-exponential target
/// curve by Levenberg-Marquardt least squares.
pub fn find_ab_params(spread: f64, min_dist: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| if x < min_dist { 1.0 } else { (-(x - min_dist) / spread).exp() })
        .collect();
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let r = 1.0 / (1.0 + a * x.powf(2.0 * b)) - y;
                r * r
            })
            .sum()
    };
    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut lambda = 1e-3;
    let mut cost = sse(a, b);
    for _ in 0..500 {
        // Normal equations of the linearized residuals.
        let (mut jtj, mut jtr) = ([[0.0f64; 2]; 2], [0.0f64; 2]);
        for (&x, &y) in xs.iter().zip(&ys) {
            let u = if x > 0.0 { x.powf(2.0 * b) } else { 0.0 };
            let den = 1.0 + a * u;
            let r = 1.0 / den - y;
            let da = -u / (den * den);
            let db = if x > 0.0 { -2.0 * a * u * x.ln() / (den * den) } else { 0.0 };
            let g = [da, db];
            for p in 0..2 {
                jtr[p] += g[p] * r;
                for q in 0..2 {
                    jtj[p][q] += g[p] * g[q];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let m00 = jtj[0][0] * (1.0 + lambda);
            let m11 = jtj[1][1] * (1.0 + lambda);
            let det = m00 * m11 - jtj[0][1] * jtj[1][0];
            if det == 0.0 {
                lambda *= 10.0;
                continue;
            }
            let da = -(m11 * jtr[0] - jtj[0][1] * jtr[1]) / det;
            let db = -(m00 * jtr[1] - jtj[1][0] * jtr[0]) / det;
            let (na, nb) = (a + da, b + db);
            let nc = if na > 0.0 && nb > 0.0 { sse(na, nb) } else { f64::INFINITY };
            if nc < cost {
                let done = (cost - nc) <= 1e-15 * cost.max(1e-300);
                a = na;
                b = nb;
                cost = nc;
                lambda = (lambda / 10.0).max(1e-12);
                improved = !done;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

fn clip(v: f64) -> f64 {
    v.clamp(-4.0, 4.0)
}

/// Full UMAP: neighbor graph, curve fit, seeded random init, SGD layout.
///
/// Rows that are exact duplicates of an earlier row receive that row's
/// final coordinates.
pub fn umap_fit_transform(x: &Array2<f64>, cfg: &UmapConfig) -> Result<Array2<f64>> {
    let n = x.nrows();
    cfg.validate(n)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("UMAP input has non-finite entries".into()));
    }
    let graph = fuzzy_simplicial_set(x, cfg.n_neighbors);
    let (a, b) = find_ab_params(SPREAD, cfg.min_dist);
    let mut rng = rng_from_seed(cfg.seed);
    let dim = cfg.n_components;
    let mut emb: Vec<f64> = (0..n * dim)
        .map(|_| rng.random::<f64>() * 2.0 * INIT_RANGE - INIT_RANGE)
        .collect();

    let n_epochs = cfg.n_epochs as f64;
    let max_w = graph.edges.iter().map(|e| e.2).fold(0.0, f64::max);
    let edges: Vec<(usize, usize, f64)> = graph
        .edges
        .iter()
        .copied()
        .filter(|e| e.2 >= max_w / n_epochs)
        .collect();
    let eps_per_sample: Vec<f64> = edges.iter().map(|e| max_w / e.2).collect();
    let eps_per_neg: Vec<f64> = eps_per_sample.iter().map(|e| e / NEGATIVE_SAMPLE_RATE).collect();
    let mut next_sample = eps_per_sample.clone();
    let mut next_neg = eps_per_neg.clone();

    let mut cur = vec![0.0; dim];
    for epoch in 0..cfg.n_epochs {
        let ep = epoch as f64;
        let alpha = 1.0 - ep / n_epochs;
        for (e, &(head, tail, _)) in edges.iter().enumerate() {
            if next_sample[e] > ep {
                continue;
            }
            let d2 = sq_dist(&emb, head, tail, dim);
            if d2 > 0.0 {
                let coeff = -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0);
                for d in 0..dim {
                    let g = clip(coeff * (emb[head * dim + d] - emb[tail * dim + d]));
                    emb[head * dim + d] += g * alpha;
                    emb[tail * dim + d] -= g * alpha;
                }
            }
            next_sample[e] += eps_per_sample[e];

            let n_neg = ((ep - next_neg[e]) / eps_per_neg[e]).floor().max(0.0) as usize;
            cur.copy_from_slice(&emb[head * dim..(head + 1) * dim]);
            for _ in 0..n_neg {
                let other = rng.random_range(0..n);
                if other == head {
                    continue;
                }
                let o = &emb[other * dim..(other + 1) * dim];
                let d2: f64 = cur.iter().zip(o).map(|(p, q)| (p - q) * (p - q)).sum();
                if d2 <= 0.0 {
                    continue;
                }
                let coeff = 2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0));
                for d in 0..dim {
                    cur[d] += clip(coeff * (cur[d] - o[d])) * alpha;
                }
            }
            emb[head * dim..(head + 1) * dim].copy_from_slice(&cur);
            next_neg[e] += n_neg as f64 * eps_per_neg[e];
        }
    }

    let mut out = Array2::from_shape_vec((n, dim), emb).expect("n x dim");
    for (i, rep) in duplicate_representatives(x).into_iter().enumerate() {
        if rep != i {
            let src = out.row(rep).to_owned();
            out.row_mut(i).assign(&src);
        }
    }
    Ok(out)
}

fn sq_dist(emb: &[f64], i: usize, j: usize, dim: usize) -> f64 {
    (0..dim)
        .map(|d| {
            let t = emb[i * dim + d] - emb[j * dim + d];
            t * t
        })
        .sum()
}

/// For each row, the index of the first row bitwise equal to it.
fn duplicate_representatives(x: &Array2<f64>) -> Vec<usize> {
    let mut first: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    x.rows()
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let key: Vec<u64> = r.iter().map(|v| (v + 0.0).to_bits()).collect();
            *first.entry(key).or_insert(i)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ab_params_match_reference_curve_fit() {
        // Reference values for spread 1.0, min_dist 0.1.
        let (a, b) = find_ab_params(1.0, 0.1);
        assert!((a - 1.576943).abs() < 1e-3, "a = {a}");
        assert!((b - 0.895061).abs() < 1e-3, "b = {b}");
    }

    #[test]
    fn sigma_calibration_hits_target() {
        let dists = vec![vec![0.0, 1.0, 1.5, 2.0, 3.0]];
        let (sig, rho) = smooth_knn_dist(&dists, 5);
        assert_eq!(rho[0], 1.0);
        let psum: f64 = dists[0][1..]
            .iter()
            .map(|&d| (-(d - rho[0]).max(0.0) / sig[0]).exp())
            .sum();
        assert!((psum - 5f64.log2()).abs() < 1e-4);
    }

    #[test]
    fn graph_symmetric_and_bounded() {
        let mut rng = rng_from_seed(4);
        let x = Array2::from_shape_fn((25, 3), |_| rng.random::<f64>());
        let g = fuzzy_simplicial_set(&x, 5);
        for &(i, j, w) in &g.edges {
            assert!(w > 0.0 && w <= 1.0);
            assert_eq!(g.weight(j, i), w);
            assert_ne!(i, j);
        }
    }

    #[test]
    fn rejects_too_many_neighbors() {
        let x = Array2::<f64>::zeros((5, 2));
        let cfg = UmapConfig { n_neighbors: 5, ..UmapConfig::default() };
        assert!(umap_fit_transform(&x, &cfg).is_err());
    }
}
