//! JSON run configuration.
//!
//! Relative paths are resolved against the directory of the config file.
//! Everything is validated before any stage runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::argclust::ArgclustConfig;
use crate::cluster::HdbscanConfig;
use crate::dimred::UmapConfig;
use crate::error::{Error, Result};
use crate::metrics::NoiseMode;
use crate::seqlabel::{ModelKind, TrainConfig};
use crate::vectorize::EmbeddingKind;

/// The six topic-clustering variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicModel {
    ArgmaxTfidf,
    ArgmaxLsa,
    KmeansTfidf,
    HdbscanTfidf,
    HdbscanUmap,
    HdbscanLsaUmap,
}

impl TopicModel {
    pub fn as_str(self) -> &'static str {
        match self {
            TopicModel::ArgmaxTfidf => "argmax_tfidf",
            TopicModel::ArgmaxLsa => "argmax_lsa",
            TopicModel::KmeansTfidf => "kmeans_tfidf",
            TopicModel::HdbscanTfidf => "hdbscan_tfidf",
            TopicModel::HdbscanUmap => "hdbscan_umap",
            TopicModel::HdbscanLsaUmap => "hdbscan_lsa_umap",
        }
    }

    pub fn is_argmax(self) -> bool {
        matches!(self, TopicModel::ArgmaxTfidf | TopicModel::ArgmaxLsa)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicConfig {
    pub model: TopicModel,
    pub max_df: f64,
    /// Defaults to 1000 for the argmax models and 10000 otherwise.
    pub max_features: Option<usize>,
    /// Clamped to the rank the data allows.
    pub lsa_dims: usize,
    /// k-means cluster count; defaults to the number of gold topics.
    pub k: Option<usize>,
    pub umap: UmapConfig,
    pub hdbscan: HdbscanConfig,
    pub top_terms: usize,
    pub queries: Vec<String>,
}

impl Default for TopicConfig {
    fn default() -> Self {
        TopicConfig {
            model: TopicModel::HdbscanUmap,
            max_df: 0.5,
            max_features: None,
            lsa_dims: 100,
            k: None,
            umap: UmapConfig::default(),
            hdbscan: HdbscanConfig::default(),
            top_terms: 10,
            queries: Vec::new(),
        }
    }
}

impl TopicConfig {
    pub fn max_features(&self) -> usize {
        self.max_features
            .unwrap_or(if self.model.is_argmax() { 1000 } else { 10_000 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    pub model: ModelKind,
    pub embedding: EmbeddingKind,
    pub train: TrainConfig,
    /// Also train and score the feed-forward baseline.
    pub compare_fnn: bool,
    /// Score on this corpus instead of the test split (cross-corpus transfer).
    pub test_corpus: Option<PathBuf>,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            model: ModelKind::Bilstm,
            embedding: EmbeddingKind::BertCls,
            train: TrainConfig::default(),
            compare_fnn: false,
            test_corpus: None,
        }
    }
}

/// Where the aspect clustering stage takes its arguments from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgumentSource {
    /// Spans predicted by the segmentation stage.
    #[default]
    Predicted,
    /// Spans from the gold BIO tags of the corpus.
    Gold,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AspectStageConfig {
    pub source: ArgumentSource,
    pub clustering: ArgclustConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_frac: f64,
    pub val_frac: f64,
    /// Use this split file instead of drawing one.
    pub path: Option<PathBuf>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_frac: 0.15,
            val_frac: 0.15,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HashEmbeddingConfig {
    pub dim: usize,
    /// Stand in for transformer kinds that have no embedding file.
    pub substitute_missing: bool,
}

impl Default for HashEmbeddingConfig {
    fn default() -> Self {
        HashEmbeddingConfig {
            dim: 64,
            substitute_missing: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Topics,
    Segment,
    Argclust,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub embeddings: BTreeMap<EmbeddingKind, PathBuf>,
    pub hash_embedding: HashEmbeddingConfig,
    pub split: SplitConfig,
    pub noise_modes: Vec<NoiseMode>,
    pub stages: Vec<Stage>,
    pub topics: TopicConfig,
    pub segment: SegmentConfig,
    pub argclust: AspectStageConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: PathBuf::new(),
            output_dir: PathBuf::from("out"),
            seed: 0,
            embeddings: BTreeMap::new(),
            hash_embedding: HashEmbeddingConfig::default(),
            split: SplitConfig::default(),
            noise_modes: vec![NoiseMode::WithNoiseSingleCluster, NoiseMode::ExcludeNoise],
            stages: vec![Stage::Topics, Stage::Segment, Stage::Argclust],
            topics: TopicConfig::default(),
            segment: SegmentConfig::default(),
            argclust: AspectStageConfig::default(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<PipelineConfig> {
        serde_json::from_str(text).map_err(|e| config_err(format!("line {}: {e}", e.line())))
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: impl AsRef<Path>) -> Result<PipelineConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.output_dir);
        self.embeddings.values_mut().for_each(fix);
        if let Some(p) = self.split.path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.segment.test_corpus.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus.as_os_str().is_empty() {
            return Err(config_err("`corpus` is required"));
        }
        let must_exist = |p: &Path, what: &str| {
            if p.is_file() {
                Ok(())
            } else {
                Err(config_err(format!("{what} {} does not exist", p.display())))
            }
        };
        must_exist(&self.corpus, "corpus")?;
        for (kind, p) in &self.embeddings {
            if *kind == EmbeddingKind::Tfidf {
                return Err(config_err("tf-idf vectors are computed, not loaded"));
            }
            must_exist(p, &format!("{kind} embedding file"))?;
        }
        if let Some(p) = &self.split.path {
            must_exist(p, "split file")?;
        }
        if let Some(p) = &self.segment.test_corpus {
            must_exist(p, "test corpus")?;
        }
        if self.stages.is_empty() {
            return Err(config_err("no stages selected"));
        }
        if self.noise_modes.is_empty() {
            return Err(config_err("at least one noise mode is required"));
        }
        if self.hash_embedding.dim < 8 {
            return Err(config_err("hash_embedding.dim must be at least 8"));
        }
        let s = &self.split;
        if !(s.test_frac > 0.0 && s.test_frac < 1.0 && s.val_frac >= 0.0 && s.test_frac + s.val_frac < 1.0) {
            return Err(config_err("split fractions need 0 < test_frac, 0 <= val_frac, test_frac + val_frac < 1"));
        }
        if s.val_frac == 0.0 && self.stages.contains(&Stage::Segment) {
            return Err(config_err("segmentation needs a validation split (val_frac > 0)"));
        }
        let t = &self.topics;
        if !(t.max_df > 0.0 && t.max_df <= 1.0) {
            return Err(config_err("topics.max_df must be in (0, 1]"));
        }
        if t.lsa_dims == 0 || t.top_terms == 0 || t.k == Some(0) {
            return Err(config_err("topics.lsa_dims, topics.top_terms and topics.k must be positive"));
        }
        if t.hdbscan.min_cluster_size < 2 || t.hdbscan.min_samples < 1 {
            return Err(config_err("HDBSCAN needs min_cluster_size >= 2 and min_samples >= 1"));
        }
        if self.segment.embedding == EmbeddingKind::Tfidf {
            return Err(config_err("segmentation needs sentence embeddings, not tf-idf"));
        }
        self.segment.train.validate()?;
        self.argclust.clustering.validate()?;
        Ok(())
    }
}
