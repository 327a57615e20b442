//! Per-topic clustering of arguments by aspect.
//!
//! Arguments come from a segmented corpus: one document per argument whose
//! id is `<source doc>#<first>-<last>` (inclusive sentence indices), so the
//! sentence embeddings of the source document can be pooled.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::cluster::{hdbscan, kmeans, ClusterAssignment, HdbscanConfig, KmeansConfig};
use crate::corpus::{round_half_up, sentence_id, Corpus};
use crate::dimred::{umap_fit_transform, UmapConfig};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_clustering, ClusteringEval, NoiseMode};
use crate::rng::derive_seed;
use crate::vectorize::{build_vocab, tfidf_matrix, tokenize, EmbeddingKind, EmbeddingSet, Vocabulary};

/// Linear map from a topic's argument count to its aspect count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KRegression {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares over `(argument_count, aspect_count)` pairs.
pub fn fit_k_regression(points: &[(usize, usize)]) -> Result<KRegression> {
    let distinct: BTreeSet<usize> = points.iter().map(|p| p.0).collect();
    if distinct.len() < 2 {
        return Err(Error::invalid(
            "k regression needs at least two distinct argument counts",
        ));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in points {
        let dx = x as f64 - mx;
        sxy += dx * (y as f64 - my);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    Ok(KRegression {
        slope,
        intercept: my - slope * mx,
    })
}

/// `round(slope * n + intercept)`, half up, clamped to `[1, n]`.
pub fn estimate_k(reg: &KRegression, n_args: usize) -> usize {
    let pred = reg.slope * n_args as f64 + reg.intercept;
    let k = if pred.is_finite() { round_half_up(pred) } else { 1 };
    k.clamp(1, n_args.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Kmeans,
    Hdbscan,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Kmeans => "kmeans",
            Algorithm::Hdbscan => "hdbscan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    None,
    Umap,
}

impl Reduction {
    pub fn as_str(self) -> &'static str {
        match self {
            Reduction::None => "none",
            Reduction::Umap => "umap",
        }
    }
}

/// Where tf-idf statistics are collected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TfidfScope {
    WithinTopic,
    AcrossTopics,
}

impl TfidfScope {
    pub fn as_str(self) -> &'static str {
        match self {
            TfidfScope::WithinTopic => "within_topic",
            TfidfScope::AcrossTopics => "across_topics",
        }
    }
}

/// One clustering setup. `scope` only matters for tf-idf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AspectConfig {
    pub embedding: EmbeddingKind,
    pub algorithm: Algorithm,
    pub dimred: Reduction,
    #[serde(default = "default_scope")]
    pub scope: TfidfScope,
}

fn default_scope() -> TfidfScope {
    TfidfScope::WithinTopic
}

impl AspectConfig {
    pub fn new(embedding: EmbeddingKind, algorithm: Algorithm, dimred: Reduction, scope: TfidfScope) -> Self {
        AspectConfig {
            embedding,
            algorithm,
            dimred,
            scope,
        }
    }

    fn scope_label(&self) -> &'static str {
        if self.embedding == EmbeddingKind::Tfidf {
            self.scope.as_str()
        } else {
            "none"
        }
    }
}

/// A reported table row: a configuration under one noise convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridRow {
    #[serde(flatten)]
    pub config: AspectConfig,
    #[serde(default = "default_noise")]
    pub noise_mode: NoiseMode,
}

fn default_noise() -> NoiseMode {
    NoiseMode::WithNoiseSingleCluster
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPreset {
    /// The twelve reference configurations.
    Standard,
    /// Every embedding x algorithm x reduction x scope combination, with
    /// an extra noise-excluded row for each HDBSCAN setup.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Preset(GridPreset),
    Rows(Vec<GridRow>),
}

impl Default for Grid {
    fn default() -> Self {
        Grid::Preset(GridPreset::Standard)
    }
}

fn row(embedding: EmbeddingKind, algorithm: Algorithm, dimred: Reduction, scope: TfidfScope, noise_mode: NoiseMode) -> GridRow {
    GridRow {
        config: AspectConfig::new(embedding, algorithm, dimred, scope),
        noise_mode,
    }
}

fn standard_rows() -> Vec<GridRow> {
    use Algorithm::*;
    use EmbeddingKind::*;
    use Reduction::*;
    use TfidfScope::*;
    let with = NoiseMode::WithNoiseSingleCluster;
    vec![
        row(Tfidf, Hdbscan, Umap, WithinTopic, with),
        row(Tfidf, Hdbscan, Umap, AcrossTopics, with),
        row(Tfidf, Hdbscan, None, WithinTopic, with),
        row(Tfidf, Kmeans, None, WithinTopic, with),
        row(Tfidf, Kmeans, None, AcrossTopics, with),
        row(BertCls, Hdbscan, Umap, WithinTopic, with),
        row(BertCls, Hdbscan, None, WithinTopic, with),
        row(BertCls, Kmeans, None, WithinTopic, with),
        row(BertAvg, Hdbscan, Umap, WithinTopic, with),
        row(BertAvg, Hdbscan, None, WithinTopic, with),
        row(BertAvg, Kmeans, None, WithinTopic, with),
        row(Tfidf, Hdbscan, None, WithinTopic, NoiseMode::ExcludeNoise),
    ]
}

impl Grid {
    pub fn rows(&self) -> Vec<GridRow> {
        match self {
            Grid::Rows(rows) => rows.clone(),
            Grid::Preset(GridPreset::Standard) => standard_rows(),
            Grid::Preset(GridPreset::Full) => {
                let mut rows = Vec::new();
                for embedding in [EmbeddingKind::Tfidf, EmbeddingKind::BertCls, EmbeddingKind::BertAvg] {
                    let scopes: &[TfidfScope] = if embedding == EmbeddingKind::Tfidf {
                        &[TfidfScope::WithinTopic, TfidfScope::AcrossTopics]
                    } else {
                        &[TfidfScope::WithinTopic]
                    };
                    for &scope in scopes {
                        for algorithm in [Algorithm::Hdbscan, Algorithm::Kmeans] {
                            for dimred in [Reduction::Umap, Reduction::None] {
                                rows.push(row(embedding, algorithm, dimred, scope, NoiseMode::WithNoiseSingleCluster));
                                if algorithm == Algorithm::Hdbscan {
                                    rows.push(row(embedding, algorithm, dimred, scope, NoiseMode::ExcludeNoise));
                                }
                            }
                        }
                    }
                }
                rows
            }
        }
    }
}

/// Whether a row is one of the twelve reference configurations.
pub fn in_standard_grid(r: &GridRow) -> bool {
    let mut probe = *r;
    if probe.config.embedding != EmbeddingKind::Tfidf {
        probe.config.scope = TfidfScope::WithinTopic;
    }
    standard_rows().contains(&probe)
}

/// Which topics are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluateOn {
    #[default]
    Test,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArgclustConfig {
    pub grid: Grid,
    pub hdbscan: HdbscanConfig,
    /// `n_neighbors` is clamped to one below each topic's argument count.
    pub umap: UmapConfig,
    pub max_df: f64,
    pub max_features: Option<usize>,
    pub kmeans_max_iter: usize,
    pub evaluate_on: EvaluateOn,
}

impl Default for ArgclustConfig {
    fn default() -> Self {
        ArgclustConfig {
            grid: Grid::default(),
            hdbscan: HdbscanConfig::default(),
            umap: UmapConfig::default(),
            max_df: 1.0,
            max_features: Some(10_000),
            kmeans_max_iter: 300,
            evaluate_on: EvaluateOn::Test,
        }
    }
}

impl ArgclustConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.rows().is_empty() {
            return Err(Error::Config("argument clustering grid has no configurations".into()));
        }
        if !(self.max_df > 0.0 && self.max_df <= 1.0) {
            return Err(Error::Config(format!("max_df {} not in (0, 1]", self.max_df)));
        }
        if self.hdbscan.min_cluster_size < 2 || self.hdbscan.min_samples < 1 {
            return Err(Error::Config("HDBSCAN needs min_cluster_size >= 2 and min_samples >= 1".into()));
        }
        if self.kmeans_max_iter == 0 {
            return Err(Error::Config("kmeans_max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Argument {
    pub id: String,
    pub topic: String,
    pub text: String,
    pub aspect: Option<String>,
    /// Keys of the argument's sentences in sentence embedding files.
    pub sentence_ids: Vec<String>,
}

/// Majority aspect of the sentences, ties to the lexicographically smallest.
pub(crate) fn majority_aspect<'a>(aspects: impl Iterator<Item = &'a str>) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for a in aspects {
        *counts.entry(a).or_default() += 1;
    }
    let max = *counts.values().max()?;
    counts.into_iter().find(|&(_, c)| c == max).map(|(a, _)| a.to_string())
}

/// Source sentence ids encoded in a segmented document id.
fn source_sentence_ids(doc_id: &str, n: usize) -> Option<Vec<String>> {
    let (source, range) = doc_id.rsplit_once('#')?;
    let (a, b) = range.split_once('-')?;
    let (a, b): (usize, usize) = (a.parse().ok()?, b.parse().ok()?);
    (b >= a && b - a + 1 == n).then(|| (a..=b).map(|i| sentence_id(source, i)).collect())
}

/// One argument per document of a segmented corpus.
pub fn arguments_from_corpus(corpus: &Corpus) -> Vec<Argument> {
    corpus
        .documents
        .iter()
        .map(|doc| Argument {
            id: doc.doc_id.clone(),
            topic: doc.topic.clone(),
            text: doc.text(),
            aspect: majority_aspect(doc.sentences.iter().filter_map(|s| s.aspect.as_deref())),
            sentence_ids: source_sentence_ids(&doc.doc_id, doc.sentences.len())
                .unwrap_or_else(|| (0..doc.sentences.len()).map(|i| doc.sentence_id(i)).collect()),
        })
        .collect()
}

/// Groups arguments by topic in sorted topic order.
pub fn by_topic(args: &[Argument]) -> BTreeMap<&str, Vec<&Argument>> {
    let mut map: BTreeMap<&str, Vec<&Argument>> = BTreeMap::new();
    for a in args {
        map.entry(a.topic.as_str()).or_default().push(a);
    }
    map
}

/// Regression over the aspect counts of the given topics. Topics without
/// aspect labels are ignored; when all counts coincide the fit degenerates
/// to a constant at the mean aspect count.
pub fn regression_from_topics(args: &[Argument], topics: &BTreeSet<String>) -> Result<KRegression> {
    let mut points = Vec::new();
    for (topic, members) in by_topic(args) {
        if !topics.contains(topic) {
            continue;
        }
        let aspects: BTreeSet<&str> = members.iter().filter_map(|a| a.aspect.as_deref()).collect();
        if !aspects.is_empty() {
            points.push((members.len(), aspects.len()));
        }
    }
    if points.is_empty() {
        return Err(Error::invalid("no aspect-labelled topics to fit the k regression"));
    }
    fit_k_regression(&points).or_else(|_| {
        let mean = points.iter().map(|p| p.1 as f64).sum::<f64>() / points.len() as f64;
        Ok(KRegression {
            slope: 0.0,
            intercept: mean,
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AspectRun {
    pub topic: String,
    pub config: AspectConfig,
    pub assignment: ClusterAssignment,
    /// Scores under each noise convention; `None` when the convention leaves
    /// nothing to score (every argument is noise).
    pub evals: BTreeMap<NoiseMode, Option<ClusteringEval>>,
}

/// Shared inputs for the runs of one grid.
pub struct RunContext<'a> {
    pub cfg: &'a ArgclustConfig,
    pub reg: KRegression,
    /// Sentence embeddings for the non-tf-idf kinds.
    pub embeddings: &'a BTreeMap<EmbeddingKind, EmbeddingSet>,
    /// Vocabulary fitted over every argument, for across-topic tf-idf.
    pub global_vocab: Option<Vocabulary>,
    pub seed: u64,
}

impl<'a> RunContext<'a> {
    pub fn new(
        cfg: &'a ArgclustConfig,
        reg: KRegression,
        embeddings: &'a BTreeMap<EmbeddingKind, EmbeddingSet>,
        all_args: &[Argument],
        seed: u64,
    ) -> Result<Self> {
        let needs_global = cfg
            .grid
            .rows()
            .iter()
            .any(|r| r.config.embedding == EmbeddingKind::Tfidf && r.config.scope == TfidfScope::AcrossTopics);
        let global_vocab = if needs_global {
            let docs: Vec<Vec<String>> = all_args.iter().map(|a| tokenize(&a.text)).collect();
            Some(build_vocab(&docs, cfg.max_features, cfg.max_df)?)
        } else {
            None
        };
        Ok(RunContext {
            cfg,
            reg,
            embeddings,
            global_vocab,
            seed,
        })
    }
}

fn argument_vectors(args: &[&Argument], config: &AspectConfig, ctx: &RunContext) -> Result<Array2<f64>> {
    match config.embedding {
        EmbeddingKind::Tfidf => {
            let docs: Vec<Vec<String>> = args.iter().map(|a| tokenize(&a.text)).collect();
            match config.scope {
                TfidfScope::WithinTopic => {
                    let vocab = build_vocab(&docs, ctx.cfg.max_features, ctx.cfg.max_df)?;
                    Ok(tfidf_matrix(&docs, &vocab))
                }
                TfidfScope::AcrossTopics => {
                    let vocab = ctx
                        .global_vocab
                        .as_ref()
                        .ok_or_else(|| Error::invalid("across-topic tf-idf needs a global vocabulary"))?;
                    Ok(tfidf_matrix(&docs, vocab))
                }
            }
        }
        kind => {
            let set = ctx
                .embeddings
                .get(&kind)
                .ok_or_else(|| Error::Config(format!("no {kind} embeddings available")))?;
            let mut x = Array2::zeros((args.len(), set.dim()));
            for (i, a) in args.iter().enumerate() {
                let mut row = x.row_mut(i);
                for id in &a.sentence_ids {
                    row += &set.require(id)?;
                }
                row /= a.sentence_ids.len().max(1) as f64;
            }
            Ok(x)
        }
    }
}

/// Clusters one topic's arguments and scores the result against their aspects.
pub fn cluster_topic_arguments(args: &[&Argument], config: &AspectConfig, ctx: &RunContext) -> Result<AspectRun> {
    let n = args.len();
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 arguments, got {n}")));
    }
    let topic = args[0].topic.clone();
    let truth: Vec<&str> = args
        .iter()
        .map(|a| {
            a.aspect
                .as_deref()
                .ok_or_else(|| Error::invalid(format!("argument `{}` has no aspect label", a.id)))
        })
        .collect::<Result<_>>()?;

    let mut x = argument_vectors(args, config, ctx)?;
    let stage = format!(
        "argclust/{topic}/{}/{}/{}",
        config.embedding,
        config.scope_label(),
        config.algorithm.as_str()
    );
    // With two points a neighbour graph carries no structure; keep the input.
    if config.dimred == Reduction::Umap && n >= 3 {
        let umap = UmapConfig {
            n_neighbors: ctx.cfg.umap.n_neighbors.min(n - 1),
            seed: derive_seed(ctx.seed, &format!("{stage}/umap")),
            ..ctx.cfg.umap.clone()
        };
        x = umap_fit_transform(&x, &umap)?;
    }
    let assignment = match config.algorithm {
        Algorithm::Kmeans => {
            let mut km = KmeansConfig::new(estimate_k(&ctx.reg, n), derive_seed(ctx.seed, &format!("{stage}/kmeans")));
            km.max_iter = ctx.cfg.kmeans_max_iter;
            kmeans(&x, &km)?.assignment
        }
        Algorithm::Hdbscan => {
            let mut hc = ctx.cfg.hdbscan;
            hc.min_samples = hc.min_samples.min(n);
            hc.min_cluster_size = hc.min_cluster_size.min(n);
            hdbscan(&x, &hc)?.assignment
        }
    };
    let mut evals = BTreeMap::new();
    for mode in [NoiseMode::WithNoiseSingleCluster, NoiseMode::ExcludeNoise, NoiseMode::NoiseSingletons] {
        let e = if mode == NoiseMode::ExcludeNoise && assignment.noise_count() == n {
            None
        } else {
            Some(evaluate_clustering(&truth, &assignment, mode)?)
        };
        evals.insert(mode, e);
    }
    Ok(AspectRun {
        topic,
        config: *config,
        assignment,
        evals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    #[serde(flatten)]
    pub row: GridRow,
    pub ari: f64,
    pub ho: f64,
    pub co: f64,
    pub bcubed_f1: f64,
    pub n_topics: usize,
    pub in_standard_grid: bool,
}

/// Unweighted means over topics for each requested row.
pub fn aggregate_runs(runs: &[AspectRun], rows: &[GridRow]) -> Result<Vec<AggregateRow>> {
    if runs.is_empty() {
        return Err(Error::invalid("no runs to aggregate"));
    }
    Ok(rows
        .iter()
        .map(|r| {
            let evals: Vec<&ClusteringEval> = runs
                .iter()
                .filter(|run| run.config == r.config)
                .filter_map(|run| run.evals.get(&r.noise_mode).and_then(Option::as_ref))
                .collect();
            let mean = |f: fn(&ClusteringEval) -> f64| {
                if evals.is_empty() {
                    f64::NAN
                } else {
                    evals.iter().map(|e| f(e)).sum::<f64>() / evals.len() as f64
                }
            };
            AggregateRow {
                row: *r,
                ari: mean(|e| e.ari),
                ho: mean(|e| e.homogeneity),
                co: mean(|e| e.completeness),
                bcubed_f1: mean(|e| e.bcubed_f1),
                n_topics: evals.len(),
                in_standard_grid: in_standard_grid(r),
            }
        })
        .collect())
}

pub const CSV_HEADER: &str = "embedding,algorithm,dimred,scope,noise_mode,ari,ho,co,bcubed_f1,n_topics";

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let c = &r.row.config;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
            c.embedding,
            c.algorithm.as_str(),
            c.dimred.as_str(),
            c.scope_label(),
            r.row.noise_mode.as_str(),
            r.ari,
            r.ho,
            r.co,
            r.bcubed_f1,
            r.n_topics
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub regression: KRegression,
    pub rows: Vec<AggregateRow>,
    pub runs: Vec<AspectRun>,
    /// Topics with fewer than two arguments.
    pub skipped_topics: Vec<String>,
}

/// Runs every configuration of the grid on each evaluated topic.
pub fn run_grid(args: &[Argument], eval_topics: &BTreeSet<String>, ctx: &RunContext) -> Result<GridReport> {
    ctx.cfg.validate()?;
    let rows = ctx.cfg.grid.rows();
    let mut configs: Vec<AspectConfig> = Vec::new();
    for r in &rows {
        if !configs.contains(&r.config) {
            configs.push(r.config);
        }
    }
    let mut runs = Vec::new();
    let mut skipped = Vec::new();
    for (topic, members) in by_topic(args) {
        if !eval_topics.contains(topic) {
            continue;
        }
        if members.len() < 2 {
            skipped.push(topic.to_string());
            continue;
        }
        for config in &configs {
            runs.push(cluster_topic_arguments(&members, config, ctx)?);
        }
    }
    if runs.is_empty() {
        return Err(Error::invalid("no topic has enough arguments to cluster"));
    }
    Ok(GridReport {
        regression: ctx.reg,
        rows: aggregate_runs(&runs, &rows)?,
        runs,
        skipped_topics: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_line() {
        let r = fit_k_regression(&[(2, 1), (4, 2), (6, 3)]).unwrap();
        assert_eq!((r.slope, r.intercept), (0.5, 0.0));
    }

    #[test]
    fn constant_aspect_count() {
        let r = fit_k_regression(&[(3, 4), (9, 4), (5, 4)]).unwrap();
        assert_eq!(r.slope, 0.0);
        assert!((r.intercept - 4.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_x() {
        assert!(fit_k_regression(&[(3, 1), (3, 2)]).is_err());
        assert!(fit_k_regression(&[(3, 1)]).is_err());
    }

    #[test]
    fn k_rounding_and_clamps() {
        let r = KRegression {
            slope: 0.5,
            intercept: 0.0,
        };
        assert_eq!(estimate_k(&r, 7), 4);
        let low = KRegression {
            slope: 0.0,
            intercept: -3.0,
        };
        assert_eq!(estimate_k(&low, 5), 1);
        let high = KRegression {
            slope: 2.0,
            intercept: 0.0,
        };
        assert_eq!(estimate_k(&high, 5), 5);
    }

    #[test]
    fn standard_grid_has_twelve_rows() {
        let rows = Grid::default().rows();
        assert_eq!(rows.len(), 12);
        assert!(rows.iter().all(in_standard_grid));
        let full = Grid::Preset(GridPreset::Full).rows();
        assert!(rows.iter().all(|r| full.contains(r)));
        assert!(full.iter().any(|r| !in_standard_grid(r)));
    }

    #[test]
    fn empty_grid_is_rejected() {
        let cfg = ArgclustConfig {
            grid: Grid::Rows(vec![]),
            ..ArgclustConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(m)) if m.contains("no configurations")));
    }

    #[test]
    fn grid_json_forms() {
        let g: Grid = serde_json::from_str("\"standard\"").unwrap();
        assert_eq!(g, Grid::Preset(GridPreset::Standard));
        let g: Grid = serde_json::from_str(
            r#"[{"embedding":"bert_avg","algorithm":"kmeans","dimred":"none","noise_mode":"with_noise_single_cluster"}]"#,
        )
        .unwrap();
        assert_eq!(g.rows()[0].config.scope, TfidfScope::WithinTopic);
    }

    #[test]
    fn segmented_ids_map_back_to_source_sentences() {
        assert_eq!(source_sentence_ids("d7#2-4", 3).unwrap(), vec!["d7#2", "d7#3", "d7#4"]);
        assert!(source_sentence_ids("d7#2-4", 2).is_none());
        assert!(source_sentence_ids("plain", 1).is_none());
    }

    #[test]
    fn majority_aspect_ties() {
        assert_eq!(majority_aspect(["b", "a", "b", "a"].into_iter()).unwrap(), "a");
        assert_eq!(majority_aspect(["c", "b", "c"].into_iter()).unwrap(), "c");
        assert!(majority_aspect(std::iter::empty()).is_none());
    }

    fn arg(id: &str, topic: &str, text: &str, aspect: &str) -> Argument {
        Argument {
            id: id.into(),
            topic: topic.into(),
            text: text.into(),
            aspect: Some(aspect.into()),
            sentence_ids: vec![format!("{id}#0")],
        }
    }

    fn separable_topic() -> Vec<Argument> {
        let mut v = Vec::new();
        for (a, words) in [("x", "alpha beta gamma"), ("y", "delta epsilon zeta"), ("z", "eta theta iota")] {
            for i in 0..3 {
                v.push(arg(&format!("{a}{i}"), "t", words, a));
            }
        }
        v
    }

    #[test]
    fn separable_aspects_with_true_k() {
        let args = separable_topic();
        let refs: Vec<&Argument> = args.iter().collect();
        let cfg = ArgclustConfig::default();
        let emb = BTreeMap::new();
        let reg = KRegression {
            slope: 0.0,
            intercept: 3.0,
        };
        let ctx = RunContext::new(&cfg, reg, &emb, &args, 1).unwrap();
        for algorithm in [Algorithm::Kmeans, Algorithm::Hdbscan] {
            let c = AspectConfig::new(EmbeddingKind::Tfidf, algorithm, Reduction::None, TfidfScope::WithinTopic);
            let run = cluster_topic_arguments(&refs, &c, &ctx).unwrap();
            assert_eq!(run.evals[&NoiseMode::WithNoiseSingleCluster].unwrap().ari, 1.0);
        }
    }

    #[test]
    fn single_aspect_topic_is_homogeneous() {
        let args: Vec<Argument> = (0..6)
            .map(|i| arg(&format!("a{i}"), "t", &format!("shared w{} w{}", i % 3, i), "only"))
            .collect();
        let refs: Vec<&Argument> = args.iter().collect();
        let cfg = ArgclustConfig::default();
        let emb = BTreeMap::new();
        let reg = KRegression {
            slope: 0.0,
            intercept: 1.0,
        };
        let ctx = RunContext::new(&cfg, reg, &emb, &args, 1).unwrap();
        let c = AspectConfig::new(EmbeddingKind::Tfidf, Algorithm::Hdbscan, Reduction::None, TfidfScope::WithinTopic);
        let run = cluster_topic_arguments(&refs, &c, &ctx).unwrap();
        assert_eq!(run.evals[&NoiseMode::WithNoiseSingleCluster].unwrap().homogeneity, 1.0);
    }

    #[test]
    fn bert_vectors_pool_sentence_rows() {
        let args = vec![Argument {
            id: "d#0-1".into(),
            topic: "t".into(),
            text: "alpha beta".into(),
            aspect: Some("x".into()),
            sentence_ids: vec!["d#0".into(), "d#1".into()],
        }];
        let set = EmbeddingSet::new(
            EmbeddingKind::BertAvg,
            vec!["d#0".into(), "d#1".into()],
            ndarray::array![[1.0, 0.0], [0.0, 3.0]],
        )
        .unwrap();
        let emb = BTreeMap::from([(EmbeddingKind::BertAvg, set)]);
        let cfg = ArgclustConfig::default();
        let ctx = RunContext::new(&cfg, KRegression { slope: 0.0, intercept: 1.0 }, &emb, &args, 0).unwrap();
        let c = AspectConfig::new(EmbeddingKind::BertAvg, Algorithm::Kmeans, Reduction::None, TfidfScope::WithinTopic);
        let x = argument_vectors(&[&args[0]], &c, &ctx).unwrap();
        assert_eq!(x.row(0).to_vec(), vec![0.5, 1.5]);
    }

    #[test]
    fn aggregation_means() {
        let eval = |ari| ClusteringEval {
            ari,
            homogeneity: 1.0,
            completeness: 1.0,
            bcubed_precision: 1.0,
            bcubed_recall: 1.0,
            bcubed_f1: 1.0,
            n_clusters: 1,
            noise_fraction: 0.0,
        };
        let config = AspectConfig::new(EmbeddingKind::Tfidf, Algorithm::Kmeans, Reduction::None, TfidfScope::WithinTopic);
        let run = |ari| AspectRun {
            topic: "t".into(),
            config,
            assignment: ClusterAssignment::from_labels(&[0]),
            evals: BTreeMap::from([(NoiseMode::WithNoiseSingleCluster, Some(eval(ari)))]),
        };
        let r = GridRow {
            config,
            noise_mode: NoiseMode::WithNoiseSingleCluster,
        };
        let single = aggregate_runs(&[run(0.2)], &[r]).unwrap();
        assert_eq!(single[0].ari, 0.2);
        let two = aggregate_runs(&[run(0.2), run(0.4)], &[r]).unwrap();
        assert!((two[0].ari - 0.3).abs() < 1e-12);
        assert_eq!(two[0].n_topics, 2);
        assert!(aggregate_runs(&[], &[r]).is_err());
    }

    proptest! {
        #[test]
        fn k_is_monotone(slope in 0.0f64..2.0, intercept in -5.0f64..5.0, n in 1usize..200) {
            let r = KRegression { slope, intercept };
            prop_assert!(estimate_k(&r, n) <= estimate_k(&r, n + 1));
        }

        #[test]
        fn ols_matches_normal_equations(pts in prop::collection::vec((1usize..60, 1usize..12), 3..40)) {
            prop_assume!(pts.iter().map(|p| p.0).collect::<BTreeSet<_>>().len() >= 2);
            let r = fit_k_regression(&pts).unwrap();
            // Normal equations [n sx; sx sxx] [b; m] = [sy; sxy].
            let n = pts.len() as f64;
            let sx: f64 = pts.iter().map(|p| p.0 as f64).sum();
            let sy: f64 = pts.iter().map(|p| p.1 as f64).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 * p.0) as f64).sum();
            let sxy: f64 = pts.iter().map(|p| (p.0 * p.1) as f64).sum();
            let det = n * sxx - sx * sx;
            let m = (n * sxy - sx * sy) / det;
            let b = (sxx * sy - sx * sxy) / det;
            prop_assert!((r.slope - m).abs() <= 1e-9 * (1.0 + m.abs()));
            prop_assert!((r.intercept - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }

        #[test]
        fn one_topic_scopes_agree(words in prop::collection::vec("[a-e]{2,3}( [a-e]{2,3}){0,4}", 2..8)) {
            let args: Vec<Argument> = words.iter().enumerate().map(|(i, w)| arg(&format!("a{i}"), "t", w, "x")).collect();
            let refs: Vec<&Argument> = args.iter().collect();
            let cfg = ArgclustConfig { grid: Grid::Preset(GridPreset::Full), ..ArgclustConfig::default() };
            let emb = BTreeMap::new();
            let ctx = RunContext::new(&cfg, KRegression { slope: 0.0, intercept: 1.0 }, &emb, &args, 0).unwrap();
            let within = argument_vectors(&refs, &AspectConfig::new(EmbeddingKind::Tfidf, Algorithm::Kmeans, Reduction::None, TfidfScope::WithinTopic), &ctx).unwrap();
            let across = argument_vectors(&refs, &AspectConfig::new(EmbeddingKind::Tfidf, Algorithm::Kmeans, Reduction::None, TfidfScope::AcrossTopics), &ctx).unwrap();
            prop_assert_eq!(within, across);
        }
    }
}
