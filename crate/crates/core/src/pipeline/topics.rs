//! Topic clustering stage and keyword + cluster retrieval.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::Serialize;

use super::config::{TopicConfig, TopicModel};
use crate::cluster::{argmax_label, hdbscan, kmeans, ClusterAssignment, KmeansConfig, NOISE};
use crate::corpus::Corpus;
use crate::dimred::{lsa_fit, umap_fit_transform, UmapConfig};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_clustering, EvalReport, NoiseMode};
use crate::rng::derive_seed;
use crate::vectorize::{build_vocab, tfidf_matrix, tokenize, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterTerms {
    pub cluster: i64,
    pub size: usize,
    /// Highest mean tf-idf weights over the members, best first.
    pub terms: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct TopicStageOutput {
    pub doc_ids: Vec<String>,
    pub assignment: ClusterAssignment,
    pub report: EvalReport,
    pub terms: Vec<ClusterTerms>,
}

fn umap_for(n: usize, base: &UmapConfig, seed: u64) -> Result<UmapConfig> {
    if n < 3 {
        return Err(Error::invalid(format!("UMAP needs at least 3 documents, got {n}")));
    }
    Ok(UmapConfig {
        n_neighbors: base.n_neighbors.min(n - 1),
        seed,
        ..base.clone()
    })
}

/// Runs the configured topic model over all documents of `corpus`.
pub fn run_topic_stage(corpus: &Corpus, cfg: &TopicConfig, noise_modes: &[NoiseMode], seed: u64) -> Result<TopicStageOutput> {
    if corpus.is_empty() {
        return Err(Error::invalid("topic clustering needs at least one document"));
    }
    let docs: Vec<Vec<String>> = corpus.documents.iter().map(|d| tokenize(&d.text())).collect();
    // A single document has every term at df = 1, so max_df cannot apply.
    let max_df = if docs.len() == 1 { 1.0 } else { cfg.max_df };
    let vocab = build_vocab(&docs, Some(cfg.max_features()), max_df)?;
    let x = tfidf_matrix(&docs, &vocab);
    let n = x.nrows();
    let lsa_k = cfg.lsa_dims.min(n).min(vocab.len());

    let assignment = match cfg.model {
        TopicModel::ArgmaxTfidf => argmax_label(&x).0,
        TopicModel::ArgmaxLsa => {
            let z = lsa_fit(&x, lsa_k)?.transform(&x)?;
            argmax_label(&z.mapv(f64::abs)).0
        }
        TopicModel::KmeansTfidf => {
            let k = cfg.k.unwrap_or_else(|| corpus.topics().len());
            kmeans(&x, &KmeansConfig::new(k, derive_seed(seed, "topics/kmeans")))?.assignment
        }
        TopicModel::HdbscanTfidf => hdbscan(&x, &cfg.hdbscan)?.assignment,
        TopicModel::HdbscanUmap => {
            let z = umap_fit_transform(&x, &umap_for(n, &cfg.umap, derive_seed(seed, "topics/umap"))?)?;
            hdbscan(&z, &cfg.hdbscan)?.assignment
        }
        TopicModel::HdbscanLsaUmap => {
            let z = lsa_fit(&x, lsa_k)?.transform(&x)?;
            let z = umap_fit_transform(&z, &umap_for(n, &cfg.umap, derive_seed(seed, "topics/umap"))?)?;
            hdbscan(&z, &cfg.hdbscan)?.assignment
        }
    };

    let truth: Vec<&str> = corpus.documents.iter().map(|d| d.topic.as_str()).collect();
    let mut report = EvalReport::default();
    for &mode in noise_modes {
        if mode == NoiseMode::ExcludeNoise && assignment.noise_count() == n {
            continue;
        }
        report.add_clustering(mode.as_str(), &evaluate_clustering(&truth, &assignment, mode)?);
    }
    report.insert("n_clusters", assignment.n_clusters() as f64);
    report.insert("noise_fraction", assignment.noise_fraction());

    Ok(TopicStageOutput {
        doc_ids: corpus.documents.iter().map(|d| d.doc_id.clone()).collect(),
        terms: cluster_terms(&assignment, &x, &vocab, cfg.top_terms),
        assignment,
        report,
    })
}

/// Top terms per cluster by mean tf-idf weight; ties go to the smaller term.
pub fn cluster_terms(assignment: &ClusterAssignment, x: &Array2<f64>, vocab: &Vocabulary, top: usize) -> Vec<ClusterTerms> {
    assignment
        .members()
        .iter()
        .enumerate()
        .map(|(c, members)| {
            let mut mean = vec![0.0; vocab.len()];
            for &i in members {
                for (m, v) in mean.iter_mut().zip(x.row(i)) {
                    *m += v;
                }
            }
            let mut ranked: Vec<(usize, f64)> = mean
                .into_iter()
                .map(|v| v / members.len() as f64)
                .enumerate()
                .filter(|&(_, v)| v > 0.0)
                .collect();
            // Terms are sorted, so index order is the lexicographic tie-break.
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            ranked.truncate(top);
            ClusterTerms {
                cluster: c as i64,
                size: members.len(),
                terms: ranked.into_iter().map(|(j, v)| (vocab.terms[j].clone(), v)).collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedCluster {
    /// Cluster id, or `-1` for a noise document returned on its own.
    pub cluster: i64,
    pub score: f64,
    pub members: Vec<String>,
}

/// Keyword search expanded through topic clusters.
///
/// Each cluster scores the summed tf-idf weight of the query terms over its
/// members; every member of a matching cluster is returned, including those
/// that never mention a query term. Noise documents compete as singletons.
/// Clusters without any query term are not returned.
pub fn query_topics(query: &str, assignment: &ClusterAssignment, corpus: &Corpus) -> Result<Vec<RankedCluster>> {
    if assignment.len() != corpus.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} assignment labels", corpus.len()),
            got: format!("{}", assignment.len()),
        });
    }
    let terms = tokenize(query);
    if terms.is_empty() || corpus.is_empty() {
        return Ok(Vec::new());
    }
    let docs: Vec<Vec<String>> = corpus.documents.iter().map(|d| tokenize(&d.text())).collect();
    let Ok(vocab) = build_vocab(&docs, None, 1.0) else {
        return Ok(Vec::new());
    };
    let x = tfidf_matrix(&docs, &vocab);
    let cols: Vec<usize> = terms.iter().filter_map(|t| vocab.index(t)).collect();
    let doc_score = |i: usize| cols.iter().map(|&j| x[[i, j]]).sum::<f64>();

    let mut groups: BTreeMap<(i64, usize), Vec<usize>> = BTreeMap::new();
    for (i, &l) in assignment.labels().iter().enumerate() {
        let key = if l == NOISE { (NOISE, i) } else { (l, 0) };
        groups.entry(key).or_default().push(i);
    }
    let mut ranked: Vec<RankedCluster> = groups
        .into_iter()
        .map(|((cluster, _), members)| RankedCluster {
            cluster,
            score: members.iter().map(|&i| doc_score(i)).sum(),
            members: members.iter().map(|&i| corpus.documents[i].doc_id.clone()).collect(),
        })
        .filter(|r| r.score > 0.0)
        .collect();
    // Stable sort keeps cluster-id order among equal scores.
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(ranked)
}
