//! Segmentation stage: train a tagger, score it, cut documents into arguments.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use super::config::SegmentConfig;
use crate::argclust::{arguments_from_corpus, majority_aspect, Argument};
use crate::corpus::{BioTag, Corpus, Document, Sentence, SplitSpec};
use crate::error::{Error, Result};
use crate::metrics::{tagging_eval, TaggingEval};
use crate::rng::derive_seed;
use crate::seqlabel::{
    majority_baseline, predict_tags, repair, segment_arguments, train, EpochLoss, ModelKind, Tagger, TrainConfig,
};
use crate::vectorize::EmbeddingSet;

#[derive(Debug, Clone, Serialize)]
pub struct SegmentSummary {
    pub model: ModelKind,
    pub best_epoch: usize,
    pub majority_tag: BioTag,
    pub n_train_docs: usize,
    pub n_val_docs: usize,
    pub n_test_docs: usize,
    pub n_arguments: usize,
}

pub struct SegmentStageOutput {
    pub tagger: Tagger,
    pub trace: Vec<EpochLoss>,
    pub eval: TaggingEval,
    pub majority: TaggingEval,
    pub fnn: Option<TaggingEval>,
    /// One document per predicted argument, over the whole corpus.
    pub segmented: Corpus,
    pub summary: SegmentSummary,
}

/// Documents of the given topics; all must carry BIO tags.
fn tagged_docs(corpus: &Corpus, topics: &[String]) -> Result<Vec<Document>> {
    let keep: BTreeSet<&str> = topics.iter().map(String::as_str).collect();
    let docs: Vec<Document> = corpus
        .documents
        .iter()
        .filter(|d| keep.contains(d.topic.as_str()))
        .cloned()
        .collect();
    if let Some(d) = docs.iter().find(|d| !d.is_tagged()) {
        return Err(Error::invalid(format!("document `{}` has no BIO tags", d.doc_id)));
    }
    Ok(docs)
}

fn gold_tags(docs: &[Document]) -> Vec<Vec<BioTag>> {
    docs.iter().map(|d| d.tags().expect("checked tagged")).collect()
}

/// Cuts a document into argument documents `<doc_id>#<first>-<last>`.
/// Sentence tags and aspects are left empty.
pub fn segment_document(doc: &Document, tags: &[BioTag]) -> Vec<Document> {
    segment_arguments(&repair(tags))
        .into_iter()
        .map(|span| Document {
            doc_id: format!("{}#{}-{}", doc.doc_id, span.start, span.end - 1),
            title: doc.title.clone(),
            topic: doc.topic.clone(),
            sentences: doc.sentences[span].iter().map(|s| Sentence::new(s.text.clone())).collect(),
        })
        .collect()
}

/// Arguments cut along the gold tags, labelled with their sentences' aspects.
pub fn gold_arguments(corpus: &Corpus) -> Result<Vec<Argument>> {
    let mut docs = Vec::new();
    for d in &corpus.documents {
        let tags = d
            .tags()
            .ok_or_else(|| Error::invalid(format!("document `{}` has no BIO tags", d.doc_id)))?;
        for mut arg in segment_document(d, &tags) {
            let (a, b) = span_of(&arg.doc_id).expect("generated id");
            for (s, src) in arg.sentences.iter_mut().zip(&d.sentences[a..=b]) {
                s.aspect = src.aspect.clone();
            }
            docs.push(arg);
        }
    }
    Ok(arguments_from_corpus(&Corpus {
        name: corpus.name.clone(),
        documents: docs,
    }))
}

fn span_of(arg_id: &str) -> Option<(usize, usize)> {
    let (_, range) = arg_id.rsplit_once('#')?;
    let (a, b) = range.split_once('-')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

/// Arguments of a segmented corpus with aspects joined back from the gold
/// sentence annotations of `original`.
pub fn arguments_with_gold_aspects(segmented: &Corpus, original: &Corpus) -> Vec<Argument> {
    let by_id: HashMap<&str, &Document> = original.documents.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let mut args = arguments_from_corpus(segmented);
    for arg in &mut args {
        let source = arg.id.rsplit_once('#').map(|(s, _)| s);
        if let (Some(doc), Some((a, b))) = (source.and_then(|s| by_id.get(s)), span_of(&arg.id)) {
            if b < doc.sentences.len() && a <= b {
                arg.aspect = majority_aspect(doc.sentences[a..=b].iter().filter_map(|s| s.aspect.as_deref()));
            }
        }
    }
    args
}

/// Trains on the train topics, selects on the validation topics and scores
/// on the test topics (or on `test_corpus` for cross-corpus transfer).
pub fn run_segment_stage(
    corpus: &Corpus,
    split: &SplitSpec,
    test_corpus: Option<&Corpus>,
    embeddings: &EmbeddingSet,
    cfg: &SegmentConfig,
    seed: u64,
) -> Result<SegmentStageOutput> {
    let train_docs = tagged_docs(corpus, &split.train)?;
    let val_docs = tagged_docs(corpus, &split.val)?;
    let test_docs = match test_corpus {
        Some(tc) => tagged_docs(tc, &tc.topics().into_iter().collect::<Vec<_>>())?,
        None => tagged_docs(corpus, &split.test)?,
    };
    if train_docs.is_empty() || val_docs.is_empty() || test_docs.is_empty() {
        return Err(Error::invalid("train, validation and test splits all need documents"));
    }
    let train_cfg = TrainConfig {
        seed: derive_seed(seed, "segment/train"),
        ..cfg.train.clone()
    };
    let outcome = train(cfg.model, &train_docs, &val_docs, embeddings, &train_cfg)?;
    let truth = gold_tags(&test_docs);
    let eval = tagging_eval(&truth, &predict_tags(&outcome.model, &test_docs, embeddings)?)?;

    let majority_tag = majority_baseline(&train_docs)?;
    let constant: Vec<Vec<BioTag>> = truth.iter().map(|t| vec![majority_tag; t.len()]).collect();
    let majority = tagging_eval(&truth, &constant)?;

    let fnn = if cfg.compare_fnn && cfg.model != ModelKind::Fnn {
        let fnn_cfg = TrainConfig {
            seed: derive_seed(seed, "segment/train_fnn"),
            ..cfg.train.clone()
        };
        let baseline = train(ModelKind::Fnn, &train_docs, &val_docs, embeddings, &fnn_cfg)?;
        Some(tagging_eval(&truth, &predict_tags(&baseline.model, &test_docs, embeddings)?)?)
    } else {
        None
    };

    let predicted = predict_tags(&outcome.model, &corpus.documents, embeddings)?;
    let arguments: Vec<Document> = corpus
        .documents
        .iter()
        .zip(&predicted)
        .flat_map(|(d, tags)| segment_document(d, tags))
        .collect();
    let segmented = Corpus::new(format!("{}.segmented", corpus.name), arguments)?;

    Ok(SegmentStageOutput {
        summary: SegmentSummary {
            model: cfg.model,
            best_epoch: outcome.best_epoch,
            majority_tag,
            n_train_docs: train_docs.len(),
            n_val_docs: val_docs.len(),
            n_test_docs: test_docs.len(),
            n_arguments: segmented.len(),
        },
        tagger: outcome.model,
        trace: outcome.trace,
        eval,
        majority,
        fnn,
        segmented,
    })
}
