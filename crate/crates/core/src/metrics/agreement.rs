//! Krippendorff's alpha for nominal data.

use std::collections::BTreeMap;
use std::hash::Hash;

use crate::error::{Error, Result};

/// Alpha over a units x annotators table with missing cells.
///
/// Only units with at least two ratings are pairable. With the nominal
/// metric `alpha = 1 - (n - 1) * sum_{c != k} o_ck / sum_{c != k} n_c n_k`
/// where `o` is the coincidence matrix. A table that uses a single value
/// throughout has perfect agreement.
pub fn krippendorff_alpha_nominal<T: Ord + Hash + Clone>(ratings: &[Vec<Option<T>>]) -> Result<f64> {
    let mut coincidence: BTreeMap<(T, T), f64> = BTreeMap::new();
    let mut pairable_units = 0usize;
    for unit in ratings {
        let values: Vec<&T> = unit.iter().flatten().collect();
        let m = values.len();
        if m < 2 {
            continue;
        }
        pairable_units += 1;
        let w = 1.0 / (m as f64 - 1.0);
        for (i, a) in values.iter().enumerate() {
            for (j, b) in values.iter().enumerate() {
                if i != j {
                    *coincidence.entry(((*a).clone(), (*b).clone())).or_insert(0.0) += w;
                }
            }
        }
    }
    if pairable_units < 2 {
        return Err(Error::invalid(
            "Krippendorff's alpha needs at least two units with two or more ratings",
        ));
    }
    let mut marginals: BTreeMap<&T, f64> = BTreeMap::new();
    let mut observed = 0.0;
    for ((c, k), &o) in &coincidence {
        *marginals.entry(c).or_insert(0.0) += o;
        if c != k {
            observed += o;
        }
    }
    let n: f64 = marginals.values().sum();
    let sum_sq: f64 = marginals.values().map(|v| v * v).sum();
    let expected = n * n - sum_sq;
    if expected == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}
