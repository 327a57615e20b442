//! Aspect clustering stage over gold or predicted arguments.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::config::{ArgumentSource, AspectStageConfig};
use super::segment::{arguments_with_gold_aspects, gold_arguments};
use crate::argclust::{run_grid, Argument, EvaluateOn, GridReport, RunContext};
use crate::corpus::{Corpus, SplitSpec};
use crate::error::{Error, Result};
use crate::vectorize::{EmbeddingKind, EmbeddingSet};

#[derive(Debug, Clone, Serialize)]
pub struct AspectStageOutput {
    pub source: ArgumentSource,
    /// Topics the regression was fitted on.
    pub regression_topics: Vec<String>,
    pub eval_topics: Vec<String>,
    /// Arguments dropped because none of their sentences carry an aspect.
    pub unlabelled_arguments: usize,
    #[serde(flatten)]
    pub grid: GridReport,
}

/// Embedding kinds other than tf-idf that the grid needs.
pub fn required_embeddings(cfg: &AspectStageConfig) -> BTreeSet<EmbeddingKind> {
    cfg.clustering
        .grid
        .rows()
        .iter()
        .map(|r| r.config.embedding)
        .filter(|&k| k != EmbeddingKind::Tfidf)
        .collect()
}

/// Runs the grid. `segmented` must be given for predicted arguments; the
/// k regression is always fitted on gold arguments of the training topics
/// (all topics if the training topics carry no aspects).
pub fn run_argclust_stage(
    corpus: &Corpus,
    split: &SplitSpec,
    segmented: Option<&Corpus>,
    embeddings: &BTreeMap<EmbeddingKind, EmbeddingSet>,
    cfg: &AspectStageConfig,
    seed: u64,
) -> Result<AspectStageOutput> {
    let gold = gold_arguments(corpus)?;
    let args: Vec<Argument> = match cfg.source {
        ArgumentSource::Gold => gold.clone(),
        ArgumentSource::Predicted => {
            let seg = segmented.ok_or_else(|| Error::Config("predicted arguments need a segmented corpus".into()))?;
            arguments_with_gold_aspects(seg, corpus)
        }
    };
    let total = args.len();
    let args: Vec<Argument> = args.into_iter().filter(|a| a.aspect.is_some()).collect();

    let train_topics: BTreeSet<String> = split.train.iter().cloned().collect();
    let (reg, regression_topics) = match crate::argclust::regression_from_topics(&gold, &train_topics) {
        Ok(r) => (r, train_topics),
        Err(_) => {
            let all = corpus.topics();
            (crate::argclust::regression_from_topics(&gold, &all)?, all)
        }
    };
    let eval_topics: BTreeSet<String> = match cfg.clustering.evaluate_on {
        EvaluateOn::Test => split.test.iter().cloned().collect(),
        EvaluateOn::All => corpus.topics(),
    };
    let ctx = RunContext::new(&cfg.clustering, reg, embeddings, &args, seed)?;
    let grid = run_grid(&args, &eval_topics, &ctx)?;
    Ok(AspectStageOutput {
        source: cfg.source,
        regression_topics: regression_topics.into_iter().collect(),
        eval_topics: eval_topics.into_iter().collect(),
        unlabelled_arguments: total - args.len(),
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::argclust::{Algorithm, AspectConfig, Grid, GridRow, Reduction, TfidfScope};
    use crate::corpus::{BioTag, Document, Sentence};
    use crate::metrics::NoiseMode;

    fn corpus() -> Corpus {
        let words = [("cost", "money budget price"), ("fair", "justice equal rights")];
        let mut docs = Vec::new();
        for topic in ["t1", "t2", "t3"] {
            for (i, (aspect, text)) in words.iter().cycle().take(6).enumerate() {
                docs.push(Document {
                    doc_id: format!("{topic}-{i}"),
                    title: String::new(),
                    topic: topic.into(),
                    sentences: vec![Sentence::tagged(format!("{text} {topic}"), BioTag::B).with_aspect(*aspect)],
                });
            }
        }
        Corpus::new("a", docs).unwrap()
    }

    fn cfg(source: ArgumentSource) -> AspectStageConfig {
        let mut cfg = AspectStageConfig {
            source,
            ..Default::default()
        };
        cfg.clustering.grid = Grid::Rows(vec![GridRow {
            config: AspectConfig::new(EmbeddingKind::Tfidf, Algorithm::Kmeans, Reduction::None, TfidfScope::WithinTopic),
            noise_mode: NoiseMode::WithNoiseSingleCluster,
        }]);
        cfg
    }

    fn split() -> SplitSpec {
        SplitSpec {
            seed: 0,
            train: vec!["t1".into()],
            val: vec!["t2".into()],
            test: vec!["t3".into()],
        }
    }

    #[test]
    fn gold_arguments_recover_aspects() {
        let out = run_argclust_stage(&corpus(), &split(), None, &BTreeMap::new(), &cfg(ArgumentSource::Gold), 1).unwrap();
        assert_eq!(out.eval_topics, vec!["t3"]);
        assert_eq!(out.grid.rows.len(), 1);
        assert!((out.grid.rows[0].ari - 1.0).abs() < 1e-12);
        // Six arguments and two aspects in every topic: constant fit.
        assert_eq!(out.grid.regression.slope, 0.0);
        assert_eq!(out.grid.regression.intercept, 2.0);
    }

    #[test]
    fn predicted_source_needs_segmented_corpus() {
        let e = run_argclust_stage(&corpus(), &split(), None, &BTreeMap::new(), &cfg(ArgumentSource::Predicted), 1)
            .unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn only_transformer_kinds_are_required() {
        assert!(required_embeddings(&cfg(ArgumentSource::Gold)).is_empty());
        let all = required_embeddings(&AspectStageConfig::default());
        assert!(!all.contains(&EmbeddingKind::Tfidf));
        assert!(!all.is_empty());
    }
}
