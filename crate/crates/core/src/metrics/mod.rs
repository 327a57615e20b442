//! Evaluation measures for clustering, BIO tagging and annotator agreement.

pub mod agreement;
pub mod clustering;
pub mod tagging;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use agreement::krippendorff_alpha_nominal;
pub use clustering::{
    adjusted_rand_index, apply_noise_mode, bcubed, bcubed_scores, evaluate_clustering,
    homogeneity_completeness, ClusteringEval, NoiseMode,
};
pub use tagging::{tagging_eval, ClassScores, TaggingEval};

/// Flat metric-name to value map, plus the confusion matrix for tagging runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<[[usize; 3]; 3]>,
}

impl EvalReport {
    pub fn insert(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn add_clustering(&mut self, prefix: &str, e: &ClusteringEval) {
        let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        self.insert(key("ari"), e.ari);
        self.insert(key("homogeneity"), e.homogeneity);
        self.insert(key("completeness"), e.completeness);
        self.insert(key("bcubed_precision"), e.bcubed_precision);
        self.insert(key("bcubed_recall"), e.bcubed_recall);
        self.insert(key("bcubed_f1"), e.bcubed_f1);
        self.insert(key("n_clusters"), e.n_clusters as f64);
        self.insert(key("noise_fraction"), e.noise_fraction);
    }

    pub fn from_tagging(e: &TaggingEval) -> Self {
        let mut r = EvalReport::default();
        for (tag, c) in ["B", "I", "O"].iter().zip(&e.per_class) {
            r.insert(format!("{tag}.precision"), c.precision);
            r.insert(format!("{tag}.recall"), c.recall);
            r.insert(format!("{tag}.f1"), c.f1);
            r.insert(format!("{tag}.support"), c.support as f64);
        }
        r.insert("f1_macro", e.f1_macro);
        r.insert("f1_weighted", e.f1_weighted);
        r.insert("f1_macro_bi", e.f1_macro_bi);
        r.confusion = Some(e.confusion);
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}
