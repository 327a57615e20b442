use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterAssignment, NOISE};
use crate::error::{Error, Result};

/// How predicted noise points enter an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// All noise points form one extra predicted cluster.
    WithNoiseSingleCluster,
    /// Noise points are removed before scoring.
    ExcludeNoise,
    /// Every noise point is its own cluster.
    NoiseSingletons,
}

impl NoiseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseMode::WithNoiseSingleCluster => "with_noise",
            NoiseMode::ExcludeNoise => "exclude_noise",
            NoiseMode::NoiseSingletons => "noise_singletons",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringEval {
    pub ari: f64,
    pub homogeneity: f64,
    pub completeness: f64,
    pub bcubed_precision: f64,
    pub bcubed_recall: f64,
    pub bcubed_f1: f64,
    pub n_clusters: usize,
    pub noise_fraction: f64,
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch {
            expected: format!("{a} labels"),
            got: format!("{b} labels"),
        });
    }
    Ok(())
}

/// Dense ids for arbitrary labels in first-occurrence order.
fn encode<T: Eq + Hash>(labels: &[T]) -> (Vec<usize>, usize) {
    let mut map: HashMap<&T, usize> = HashMap::new();
    let ids = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    (ids, map.len())
}

struct Contingency {
    n: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    // Ordered so that floating-point sums over cells are reproducible.
    cells: BTreeMap<(usize, usize), usize>,
}

fn contingency<T: Eq + Hash, U: Eq + Hash>(truth: &[T], pred: &[U]) -> Contingency {
    let (t, nt) = encode(truth);
    let (p, np) = encode(pred);
    let mut rows = vec![0; nt];
    let mut cols = vec![0; np];
    let mut cells = BTreeMap::new();
    for (&a, &b) in t.iter().zip(&p) {
        rows[a] += 1;
        cols[b] += 1;
        *cells.entry((a, b)).or_insert(0) += 1;
    }
    Contingency {
        n: truth.len(),
        rows,
        cols,
        cells,
    }
}

fn comb2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index from pair counts. Degenerate cases where the
/// denominator vanishes (both partitions trivial and equal) return 1.
pub fn adjusted_rand_index<T: Eq + Hash, U: Eq + Hash>(truth: &[T], pred: &[U]) -> Result<f64> {
    check_lengths(truth.len(), pred.len())?;
    let c = contingency(truth, pred);
    let index: f64 = c.cells.values().map(|&v| comb2(v)).sum();
    let a: f64 = c.rows.iter().map(|&v| comb2(v)).sum();
    let b: f64 = c.cols.iter().map(|&v| comb2(v)).sum();
    let total = comb2(c.n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = a * b / total;
    let max = (a + b) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Homogeneity and completeness with natural-log entropies; a ratio with a
/// zero-entropy denominator is 1.
pub fn homogeneity_completeness<T: Eq + Hash, U: Eq + Hash>(truth: &[T], pred: &[U]) -> Result<(f64, f64)> {
    check_lengths(truth.len(), pred.len())?;
    if truth.is_empty() {
        return Ok((1.0, 1.0));
    }
    let c = contingency(truth, pred);
    let n = c.n as f64;
    let h_c = entropy(&c.rows, c.n);
    let h_k = entropy(&c.cols, c.n);
    let mut h_c_given_k = 0.0;
    let mut h_k_given_c = 0.0;
    for (&(t, p), &v) in &c.cells {
        let v = v as f64;
        h_c_given_k -= v / n * (v / c.cols[p] as f64).ln();
        h_k_given_c -= v / n * (v / c.rows[t] as f64).ln();
    }
    let ho = if h_c == 0.0 { 1.0 } else { 1.0 - h_c_given_k / h_c };
    let co = if h_k == 0.0 { 1.0 } else { 1.0 - h_k_given_c / h_k };
    Ok((ho.clamp(0.0, 1.0), co.clamp(0.0, 1.0)))
}

/// Item-averaged BCubed precision, recall and their harmonic mean.
pub fn bcubed_scores<T: Eq + Hash, U: Eq + Hash>(truth: &[T], pred: &[U]) -> Result<(f64, f64, f64)> {
    check_lengths(truth.len(), pred.len())?;
    if truth.is_empty() {
        return Err(Error::invalid("BCubed needs at least one item"));
    }
    let c = contingency(truth, pred);
    let (t, _) = encode(truth);
    let (p, _) = encode(pred);
    let n = truth.len() as f64;
    let mut precision = 0.0;
    let mut recall = 0.0;
    for (&a, &b) in t.iter().zip(&p) {
        let both = c.cells[&(a, b)] as f64;
        precision += both / c.cols[b] as f64;
        recall += both / c.rows[a] as f64;
    }
    precision /= n;
    recall /= n;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok((precision, recall, f1))
}

/// BCubed over a predicted assignment under a noise convention.
pub fn bcubed<T: Eq + Hash + Clone>(truth: &[T], pred: &ClusterAssignment, mode: NoiseMode) -> Result<(f64, f64, f64)> {
    let (t, p) = apply_noise_mode(truth, pred, mode)?;
    bcubed_scores(&t, &p)
}

/// Truth/prediction pairs after applying the noise convention. Singleton
/// noise ids are encoded as `-(index + 2)` so they never collide with real
/// clusters or each other.
pub fn apply_noise_mode<T: Clone>(truth: &[T], pred: &ClusterAssignment, mode: NoiseMode) -> Result<(Vec<T>, Vec<i64>)> {
    check_lengths(truth.len(), pred.len())?;
    let labels = pred.labels();
    match mode {
        NoiseMode::WithNoiseSingleCluster => Ok((truth.to_vec(), labels.to_vec())),
        NoiseMode::NoiseSingletons => Ok((
            truth.to_vec(),
            labels
                .iter()
                .enumerate()
                .map(|(i, &l)| if l == NOISE { -(i as i64) - 2 } else { l })
                .collect(),
        )),
        NoiseMode::ExcludeNoise => {
            let (t, p): (Vec<T>, Vec<i64>) = truth
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l != NOISE)
                .map(|(t, &l)| (t.clone(), l))
                .unzip();
            if p.is_empty() {
                return Err(Error::invalid("every item is noise; nothing left to evaluate"));
            }
            Ok((t, p))
        }
    }
}

/// Full metric bundle for one clustering against gold labels.
pub fn evaluate_clustering<T: Eq + Hash + Clone>(truth: &[T], pred: &ClusterAssignment, mode: NoiseMode) -> Result<ClusteringEval> {
    let (t, p) = apply_noise_mode(truth, pred, mode)?;
    let ari = adjusted_rand_index(&t, &p)?;
    let (homogeneity, completeness) = homogeneity_completeness(&t, &p)?;
    let (bcubed_precision, bcubed_recall, bcubed_f1) = bcubed_scores(&t, &p)?;
    Ok(ClusteringEval {
        ari,
        homogeneity,
        completeness,
        bcubed_precision,
        bcubed_recall,
        bcubed_f1,
        n_clusters: pred.n_clusters(),
        noise_fraction: pred.noise_fraction(),
    })
}
