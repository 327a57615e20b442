//! End-to-end runs: config, stage wiring and output files.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! split.json
//! topics/   assignment.json eval.json cluster_terms.json queries.json
//! segment/  model.seq loss_trace.csv eval_<model>.json eval_majority.json
//!           [eval_fnn.json] summary.json segmented.jsonl
//! argclust/ aspect_table.csv report.json
//! run_meta.json
//! ```
//!
//! Everything except `run_meta.json` is a pure function of the inputs and
//! the seed.

pub mod aspects;
pub mod config;
pub mod segment;
pub mod topics;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

pub use aspects::{required_embeddings, run_argclust_stage, AspectStageOutput};
pub use config::{
    ArgumentSource, AspectStageConfig, HashEmbeddingConfig, PipelineConfig, SegmentConfig, SplitConfig, Stage,
    TopicConfig, TopicModel,
};
pub use segment::{
    arguments_with_gold_aspects, gold_arguments, run_segment_stage, segment_document, SegmentStageOutput,
    SegmentSummary,
};
pub use topics::{cluster_terms, query_topics, run_topic_stage, ClusterTerms, RankedCluster, TopicStageOutput};

use crate::argclust::aggregate_csv;
use crate::corpus::{load_corpus, save_corpus, split_by_topic, Corpus, SplitSpec};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::rng::derive_seed;
use crate::seqlabel::{save_checkpoint, write_loss_trace};
use crate::vectorize::{hash_embed, load_embeddings, EmbeddingKind, EmbeddingSet};

/// Sentence vectors of `kind` for every sentence of `corpora`: read from the
/// configured file, or hashed when none is configured and substitution is on.
pub fn sentence_embeddings(cfg: &PipelineConfig, kind: EmbeddingKind, corpora: &[&Corpus]) -> Result<EmbeddingSet> {
    let mut ids = Vec::new();
    let mut texts = Vec::new();
    for c in corpora {
        for d in &c.documents {
            for (i, s) in d.sentences.iter().enumerate() {
                ids.push(d.sentence_id(i));
                texts.push(s.text.as_str());
            }
        }
    }
    if let Some(path) = cfg.embeddings.get(&kind) {
        return load_embeddings(path, &ids);
    }
    if kind == EmbeddingKind::HashTest || cfg.hash_embedding.substitute_missing {
        log::info!("no {kind} embedding file; using hashed sentence vectors");
        let seed = derive_seed(cfg.seed, &format!("embed/{kind}"));
        return Ok(hash_embed(ids, &texts, cfg.hash_embedding.dim, seed)?.with_kind(kind));
    }
    Err(Error::Config(format!("no embedding file configured for {kind}")))
}

/// Topic split from `split.path` or drawn from the seed.
pub fn resolve_split(cfg: &PipelineConfig, corpus: &Corpus) -> Result<SplitSpec> {
    let split = match &cfg.split.path {
        Some(p) => SplitSpec::load(p)?,
        None => split_by_topic(corpus, cfg.split.test_frac, cfg.split.val_frac, derive_seed(cfg.seed, "split"))?,
    };
    split.check_partition(corpus)?;
    Ok(split)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::invalid(format!("serializing {}: {e}", path.display())))?;
    write_text(path, &(text + "\n"))
}

#[derive(Serialize)]
struct QueryResult<'a> {
    query: &'a str,
    results: Vec<RankedCluster>,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    version: &'a str,
    seed: u64,
    stages: &'a [Stage],
    finished_unix_secs: u64,
}

/// Results of the stages that ran.
#[derive(Default)]
pub struct PipelineOutputs {
    pub split: Option<SplitSpec>,
    pub topics: Option<TopicStageOutput>,
    pub segment: Option<SegmentStageOutput>,
    pub argclust: Option<AspectStageOutput>,
}

/// Runs `stages` in pipeline order and writes their outputs.
pub fn run_pipeline(cfg: &PipelineConfig, stages: &[Stage]) -> Result<PipelineOutputs> {
    cfg.validate()?;
    let corpus = load_corpus(&cfg.corpus)?;
    let out = &cfg.output_dir;
    create_dir(out)?;
    let mut outputs = PipelineOutputs::default();

    if stages.contains(&Stage::Topics) {
        let dir = out.join("topics");
        create_dir(&dir)?;
        let t = run_topic_stage(&corpus, &cfg.topics, &cfg.noise_modes, derive_seed(cfg.seed, "topics"))?;
        t.assignment.to_file(&t.doc_ids)?.save(dir.join("assignment.json"))?;
        let mut report = t.report.clone();
        report.insert("n_documents", corpus.len() as f64);
        write_text(&dir.join("eval.json"), &report.to_json())?;
        write_json(&dir.join("cluster_terms.json"), &t.terms)?;
        let queries = cfg
            .topics
            .queries
            .iter()
            .map(|q| Ok(QueryResult {
                query: q,
                results: query_topics(q, &t.assignment, &corpus)?,
            }))
            .collect::<Result<Vec<_>>>()?;
        write_json(&dir.join("queries.json"), &queries)?;
        outputs.topics = Some(t);
    }

    let needs_split = stages.iter().any(|s| matches!(s, Stage::Segment | Stage::Argclust));
    if !needs_split {
        write_meta(cfg, stages)?;
        return Ok(outputs);
    }
    let split = resolve_split(cfg, &corpus)?;
    split.save(out.join("split.json"))?;

    let mut segmented: Option<Corpus> = None;
    if stages.contains(&Stage::Segment) {
        let dir = out.join("segment");
        create_dir(&dir)?;
        let test_corpus = cfg.segment.test_corpus.as_ref().map(load_corpus).transpose()?;
        let mut corpora = vec![&corpus];
        corpora.extend(test_corpus.as_ref());
        let emb = sentence_embeddings(cfg, cfg.segment.embedding, &corpora)?;
        let s = run_segment_stage(&corpus, &split, test_corpus.as_ref(), &emb, &cfg.segment, cfg.seed)?;
        save_checkpoint(&s.tagger, dir.join("model.seq"))?;
        let trace_path = dir.join("loss_trace.csv");
        let mut buf = Vec::new();
        write_loss_trace(&s.trace, &mut buf).map_err(|e| Error::io(&trace_path, e))?;
        fs::write(&trace_path, buf).map_err(|e| Error::io(&trace_path, e))?;
        let eval_file = |name: &str, e| write_text(&dir.join(format!("eval_{name}.json")), &EvalReport::from_tagging(e).to_json());
        eval_file(cfg.segment.model.as_str(), &s.eval)?;
        eval_file("majority", &s.majority)?;
        if let Some(f) = &s.fnn {
            eval_file("fnn", f)?;
        }
        write_json(&dir.join("summary.json"), &s.summary)?;
        save_corpus(&s.segmented, dir.join("segmented.jsonl"))?;
        segmented = Some(s.segmented.clone());
        outputs.segment = Some(s);
    }

    if stages.contains(&Stage::Argclust) {
        let dir = out.join("argclust");
        create_dir(&dir)?;
        if cfg.argclust.source == ArgumentSource::Predicted && segmented.is_none() {
            let path = out.join("segment").join("segmented.jsonl");
            if !path.is_file() {
                return Err(Error::Config(format!(
                    "predicted arguments need {}; run the segment stage first or set argclust.source to \"gold\"",
                    path.display()
                )));
            }
            segmented = Some(load_corpus(&path)?);
        }
        let mut emb = BTreeMap::new();
        for kind in required_embeddings(&cfg.argclust) {
            emb.insert(kind, sentence_embeddings(cfg, kind, &[&corpus])?);
        }
        let a = run_argclust_stage(&corpus, &split, segmented.as_ref(), &emb, &cfg.argclust, derive_seed(cfg.seed, "argclust"))?;
        write_text(&dir.join("aspect_table.csv"), &aggregate_csv(&a.grid.rows))?;
        write_json(&dir.join("report.json"), &a)?;
        outputs.argclust = Some(a);
    }

    outputs.split = Some(split);
    write_meta(cfg, stages)?;
    Ok(outputs)
}

fn write_meta(cfg: &PipelineConfig, stages: &[Stage]) -> Result<()> {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    write_json(
        &cfg.output_dir.join("run_meta.json"),
        &RunMeta {
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            stages,
            finished_unix_secs: secs,
        },
    )
}

/// Files written by a run, relative to the output directory, sorted.
pub fn output_files(dir: &Path) -> Result<Vec<PathBuf>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                out.push(path.strip_prefix(root).expect("under root").to_path_buf());
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}
