//! HDBSCAN over Euclidean distances.
//!
//! Pipeline: core distances, mutual reachability, Prim MST, single-linkage
//! merge list, condensed tree, excess-of-mass selection.
//!
//! Core distance of a point is the distance to its `min_samples`-th nearest
//! neighbor counting the point itself, so `min_samples = 1` gives zero.
//! Merges at distance zero get a finite density `lambda` just above the
//! densest positive merge, keeping stabilities finite and scale-covariant.
//! When the condensed tree never splits into two clusters the root itself
//! is returned as a single cluster.

use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{sq_euclidean, ClusterAssignment};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HdbscanConfig {
    pub min_cluster_size: usize,
    pub min_samples: usize,
}

impl Default for HdbscanConfig {
    fn default() -> Self {
        HdbscanConfig {
            min_cluster_size: 2,
            min_samples: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// One condensed-tree row. `child` is a point index below `n` or a cluster
/// id (`n` is the root).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondensedEdge {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub child_size: usize,
}

#[derive(Debug, Clone)]
pub struct HdbscanResult {
    pub assignment: ClusterAssignment,
    /// Membership strength in `[0, 1]`; zero for noise.
    pub probabilities: Vec<f64>,
    pub mst: Vec<MstEdge>,
    pub condensed: Vec<CondensedEdge>,
}

impl HdbscanResult {
    pub fn mst_weight(&self) -> f64 {
        self.mst.iter().map(|e| e.weight).sum()
    }
}

pub fn pairwise_distances(x: &Array2<f64>) -> Array2<f64> {
    let x = x.as_standard_layout();
    let n = x.nrows();
    let rows: Vec<&[f64]> = x.rows().into_iter().map(|r| r.to_slice().expect("standard")).collect();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v = sq_euclidean(rows[i], rows[j]).sqrt();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// Distance to the `min_samples`-th nearest point, self included.
pub fn core_distances(dist: &Array2<f64>, min_samples: usize) -> Vec<f64> {
    dist.rows()
        .into_iter()
        .map(|row| {
            let mut r: Vec<f64> = row.to_vec();
            r.sort_by(f64::total_cmp);
            r[min_samples - 1]
        })
        .collect()
}

pub fn mutual_reachability(dist: &Array2<f64>, core: &[f64]) -> Array2<f64> {
    let n = dist.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            0.0
        } else {
            dist[[i, j]].max(core[i]).max(core[j])
        }
    })
}

/// Prim's algorithm on a dense symmetric weight matrix, starting at vertex 0.
/// Ties pick the lowest vertex index.
pub fn prim_mst(w: &Array2<f64>) -> Vec<MstEdge> {
    let n = w.nrows();
    if n == 0 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0usize;
    in_tree[0] = true;
    for _ in 1..n {
        for v in 0..n {
            if !in_tree[v] && w[[current, v]] < best[v] {
                best[v] = w[[current, v]];
                from[v] = current;
            }
        }
        let mut next = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (next == usize::MAX || best[v] < best[next]) {
                next = v;
            }
        }
        in_tree[next] = true;
        edges.push(MstEdge {
            a: from[next],
            b: next,
            weight: best[next],
        });
        current = next;
    }
    edges
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

#[derive(Debug, Clone, Copy)]
struct Merge {
    left: usize,
    right: usize,
    distance: f64,
    size: usize,
}

/// Single-linkage merges from MST edges; merge `i` creates node `n + i`.
/// Union-find roots are always tree node ids.
fn single_linkage(n: usize, mst: &[MstEdge]) -> Vec<Merge> {
    let mut sorted = mst.to_vec();
    sorted.sort_by(|a, b| a.weight.total_cmp(&b.weight));
    let mut uf = UnionFind::new(2 * n - 1);
    let mut sizes = vec![1usize; 2 * n - 1];
    let mut merges = Vec::with_capacity(n - 1);
    for e in sorted {
        let left = uf.find(e.a);
        let right = uf.find(e.b);
        let new = n + merges.len();
        sizes[new] = sizes[left] + sizes[right];
        merges.push(Merge {
            left,
            right,
            distance: e.weight,
            size: sizes[new],
        });
        uf.parent[left] = new;
        uf.parent[right] = new;
    }
    merges
}

fn leaves(n: usize, merges: &[Merge], node: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![node];
    while let Some(v) = stack.pop() {
        if v < n {
            out.push(v);
        } else {
            let m = merges[v - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
    out
}

fn condense(n: usize, merges: &[Merge], mcs: usize, lambda_of: impl Fn(f64) -> f64) -> Vec<CondensedEdge> {
    let size_of = |v: usize| if v < n { 1 } else { merges[v - n].size };
    let root = 2 * n - 2;
    let mut label: HashMap<usize, usize> = HashMap::new();
    label.insert(root, n);
    let mut next_label = n + 1;
    let mut out = Vec::new();
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(node) = queue.pop_front() {
        if node < n {
            continue;
        }
        let Some(&parent) = label.get(&node) else { continue };
        let m = merges[node - n];
        let lambda = lambda_of(m.distance);
        let (ls, rs) = (size_of(m.left), size_of(m.right));
        let fall_out = |child: usize, out: &mut Vec<CondensedEdge>| {
            for p in leaves(n, merges, child) {
                out.push(CondensedEdge {
                    parent,
                    child: p,
                    lambda,
                    child_size: 1,
                });
            }
        };
        match (ls >= mcs, rs >= mcs) {
            (true, true) => {
                for (child, size) in [(m.left, ls), (m.right, rs)] {
                    label.insert(child, next_label);
                    out.push(CondensedEdge {
                        parent,
                        child: next_label,
                        lambda,
                        child_size: size,
                    });
                    next_label += 1;
                    queue.push_back(child);
                }
            }
            (false, false) => {
                fall_out(m.left, &mut out);
                fall_out(m.right, &mut out);
            }
            (false, true) => {
                fall_out(m.left, &mut out);
                label.insert(m.right, parent);
                queue.push_back(m.right);
            }
            (true, false) => {
                fall_out(m.right, &mut out);
                label.insert(m.left, parent);
                queue.push_back(m.left);
            }
        }
    }
    out
}

/// Excess-of-mass selection. Returns the selected cluster ids.
fn select_clusters(n: usize, condensed: &[CondensedEdge]) -> Vec<usize> {
    let n_clusters = condensed
        .iter()
        .filter(|e| e.child >= n)
        .map(|e| e.child - n + 1)
        .max()
        .unwrap_or(1);
    let mut birth = vec![0.0f64; n_clusters];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
    for e in condensed.iter().filter(|e| e.child >= n) {
        birth[e.child - n] = e.lambda;
        children[e.parent - n].push(e.child - n);
    }
    let mut stability = vec![0.0f64; n_clusters];
    for e in condensed {
        let c = e.parent - n;
        stability[c] += (e.lambda - birth[c]) * e.child_size as f64;
    }
    if children[0].is_empty() {
        return vec![n];
    }
    let mut selected = vec![true; n_clusters];
    selected[0] = false;
    for c in (1..n_clusters).rev() {
        if children[c].is_empty() {
            continue;
        }
        let subtree: f64 = children[c].iter().map(|&k| stability[k]).sum();
        if subtree > stability[c] {
            selected[c] = false;
            stability[c] = subtree;
        } else {
            let mut stack = children[c].clone();
            while let Some(d) = stack.pop() {
                selected[d] = false;
                stack.extend(children[d].iter().copied());
            }
        }
    }
    (0..n_clusters).filter(|&c| selected[c]).map(|c| c + n).collect()
}

pub fn hdbscan(x: &Array2<f64>, cfg: &HdbscanConfig) -> Result<HdbscanResult> {
    let n = x.nrows();
    if cfg.min_cluster_size < 2 {
        return Err(Error::invalid("min_cluster_size must be at least 2"));
    }
    if cfg.min_samples < 1 {
        return Err(Error::invalid("min_samples must be at least 1"));
    }
    if n < cfg.min_cluster_size {
        return Err(Error::invalid(format!(
            "{n} points is fewer than min_cluster_size {}",
            cfg.min_cluster_size
        )));
    }
    if cfg.min_samples > n {
        return Err(Error::invalid(format!(
            "min_samples {} exceeds {n} points",
            cfg.min_samples
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("HDBSCAN input has non-finite entries".into()));
    }
    let dist = pairwise_distances(x);
    let core = core_distances(&dist, cfg.min_samples);
    let mr = mutual_reachability(&dist, &core);
    let mst = prim_mst(&mr);
    let merges = single_linkage(n, &mst);

    let min_pos = merges
        .iter()
        .map(|m| m.distance)
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let cap = if min_pos.is_finite() { 2.0 / min_pos } else { 1.0 };
    let lambda_of = |d: f64| if d > 0.0 { 1.0 / d } else { cap };
    let condensed = condense(n, &merges, cfg.min_cluster_size, lambda_of);
    let selected = select_clusters(n, &condensed);

    let mut parent_of_cluster: HashMap<usize, usize> = HashMap::new();
    let mut point_entry = vec![(n, 0.0f64); n];
    for e in &condensed {
        if e.child >= n {
            parent_of_cluster.insert(e.child, e.parent);
        } else {
            point_entry[e.child] = (e.parent, e.lambda);
        }
    }
    let is_selected = |c: usize| selected.contains(&c);
    let mut raw: Vec<Option<usize>> = vec![None; n];
    for (p, &(mut c, _)) in point_entry.iter().enumerate() {
        loop {
            if is_selected(c) {
                raw[p] = Some(c);
                break;
            }
            match parent_of_cluster.get(&c) {
                Some(&up) => c = up,
                None => break,
            }
        }
    }
    let mut max_lambda: HashMap<usize, f64> = HashMap::new();
    for (p, r) in raw.iter().enumerate() {
        if let Some(c) = r {
            let m = max_lambda.entry(*c).or_insert(0.0);
            *m = m.max(point_entry[p].1);
        }
    }
    let probabilities = raw
        .iter()
        .enumerate()
        .map(|(p, r)| match r {
            None => 0.0,
            Some(c) => {
                let m = max_lambda[c];
                if m > 0.0 { point_entry[p].1.min(m) / m } else { 1.0 }
            }
        })
        .collect();
    Ok(HdbscanResult {
        assignment: ClusterAssignment::from_raw(&raw),
        probabilities,
        mst,
        condensed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_triads_and_an_outlier() {
        let x = array![
            [0.0, 0.0],
            [0.0, 1.0],
            [1.0, 0.0],
            [10.0, 0.0],
            [10.0, 1.0],
            [11.0, 0.0],
            [50.0, 50.0]
        ];
        let r = hdbscan(&x, &HdbscanConfig::default()).unwrap();
        assert_eq!(r.assignment.labels(), &[0, 0, 0, 1, 1, 1, -1]);
        assert_eq!(r.probabilities[6], 0.0);
        assert!(r.probabilities[..6].iter().all(|&p| p > 0.0 && p <= 1.0));
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let x = Array2::from_elem((5, 3), 0.25);
        let r = hdbscan(&x, &HdbscanConfig::default()).unwrap();
        assert_eq!(r.assignment.labels(), &[0; 5]);
    }

    #[test]
    fn uniform_line_has_at_most_one_cluster() {
        let x = Array2::from_shape_fn((6, 1), |(i, _)| i as f64);
        let cfg = HdbscanConfig {
            min_cluster_size: 6,
            min_samples: 6,
        };
        let r = hdbscan(&x, &cfg).unwrap();
        assert!(r.assignment.n_clusters() <= 1);
    }

    #[test]
    fn too_few_points() {
        let x = Array2::<f64>::zeros((2, 2));
        let cfg = HdbscanConfig {
            min_cluster_size: 3,
            min_samples: 1,
        };
        assert!(hdbscan(&x, &cfg).is_err());
    }

    #[test]
    fn prim_matches_hand_tree() {
        let w = array![[0.0, 1.0, 4.0], [1.0, 0.0, 2.0], [4.0, 2.0, 0.0]];
        let mst = prim_mst(&w);
        assert_eq!(mst.iter().map(|e| e.weight).sum::<f64>(), 3.0);
    }
}
