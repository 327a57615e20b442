//! Clustering algorithms and the shared assignment type.

pub mod argmax;
pub mod hdbscan;
pub mod kmeans;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use argmax::argmax_label;
pub use hdbscan::{hdbscan, HdbscanConfig, HdbscanResult};
pub use kmeans::{kmeans, KmeansConfig, KmeansResult};

/// Reserved label for points assigned to no cluster.
pub const NOISE: i64 = -1;

/// Per-item cluster ids. Non-noise ids are dense `0..n_clusters`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterAssignment {
    labels: Vec<i64>,
    n_clusters: usize,
}

impl ClusterAssignment {
    /// Relabels arbitrary ids densely in first-occurrence order. Any
    /// negative id is treated as noise.
    pub fn from_raw<T: Copy + Eq + std::hash::Hash>(raw: &[Option<T>]) -> Self {
        let mut map: HashMap<T, i64> = HashMap::new();
        let labels = raw
            .iter()
            .map(|r| match r {
                None => NOISE,
                Some(v) => {
                    let next = map.len() as i64;
                    *map.entry(*v).or_insert(next)
                }
            })
            .collect();
        ClusterAssignment {
            labels,
            n_clusters: map.len(),
        }
    }

    pub fn from_labels(labels: &[i64]) -> Self {
        let raw: Vec<Option<i64>> = labels.iter().map(|&l| (l >= 0).then_some(l)).collect();
        ClusterAssignment::from_raw(&raw)
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    pub fn noise_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            0.0
        } else {
            self.noise_count() as f64 / self.labels.len() as f64
        }
    }

    /// Member indices per cluster id.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= 0 {
                out[l as usize].push(i);
            }
        }
        out
    }

    pub fn to_file(&self, ids: &[String]) -> Result<AssignmentFile> {
        if ids.len() != self.labels.len() {
            return Err(Error::invalid("assignment and id list differ in length"));
        }
        Ok(AssignmentFile {
            labels: ids.iter().cloned().zip(self.labels.iter().copied()).collect(),
            noise_id: NOISE,
        })
    }
}

/// JSON form: `{"labels": {doc_id: int}, "noise_id": -1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentFile {
    pub labels: BTreeMap<String, i64>,
    pub noise_id: i64,
}

impl AssignmentFile {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("assignment serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<AssignmentFile> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Labels in the order of `ids`, remapped densely. Unknown ids are an error.
    pub fn assignment_for(&self, ids: &[String]) -> Result<ClusterAssignment> {
        let mut raw = Vec::with_capacity(ids.len());
        for id in ids {
            let l = *self
                .labels
                .get(id)
                .ok_or_else(|| Error::invalid(format!("assignment has no label for {id:?}")))?;
            raw.push((l != self.noise_id).then_some(l));
        }
        Ok(ClusterAssignment::from_raw(&raw))
    }
}

pub(crate) fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
