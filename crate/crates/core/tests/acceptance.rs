//! Acceptance gate: one PASS/FAIL line per criterion, each checked against
//! its tolerance and its runtime budget. Pass a substring as the first
//! argument to run only matching criteria.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use argmine::argclust::{fit_k_regression, Algorithm, ArgclustConfig, EvaluateOn, Grid, GridPreset};
use argmine::cluster::{hdbscan, HdbscanConfig, NOISE};
use argmine::corpus::{save_corpus, split_by_topic, BioTag};
use argmine::metrics::{adjusted_rand_index, bcubed_scores, homogeneity_completeness, tagging_eval};
use argmine::pipeline::{
    output_files, run_argclust_stage, run_pipeline, run_segment_stage, run_topic_stage, sentence_embeddings,
    ArgumentSource, AspectStageConfig, PipelineConfig, SegmentConfig, Stage, TopicConfig, TopicModel,
};
use argmine::rng::rng_from_seed;
use argmine::seqlabel::{FocalLoss, ModelKind, Tagger, TrainConfig};
use argmine::vectorize::{hash_embed, EmbeddingKind};
use ndarray::Array2;
use rand::Rng;

type Check = Result<(bool, String), String>;

fn rel_err(num: f64, ana: f64) -> f64 {
    (num - ana).abs() / num.abs().max(ana.abs()).max(1e-6)
}

fn majority_baseline_parity() -> Check {
    // 719 I among 1000 sentences; the rest split between B and O.
    let truth: Vec<Vec<BioTag>> = vec![[vec![BioTag::I; 719], vec![BioTag::B; 140], vec![BioTag::O; 141]].concat()];
    let pred = vec![vec![BioTag::I; 1000]];
    let e = tagging_eval(&truth, &pred).map_err(|e| e.to_string())?;
    let ok = (e.f1_macro - 0.279).abs() <= 0.001 && (e.f1_weighted - 0.602).abs() <= 0.001;
    Ok((ok, format!("f1_macro={:.4} f1_weighted={:.4}", e.f1_macro, e.f1_weighted)))
}

/// Adjusted Rand index by enumerating every item pair.
fn ari_oracle(t: &[usize], p: &[usize]) -> f64 {
    let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..t.len() {
        for j in i + 1..t.len() {
            match (t[i] == t[j], p[i] == p[j]) {
                (true, true) => a += 1.0,
                (true, false) => b += 1.0,
                (false, true) => c += 1.0,
                (false, false) => d += 1.0,
            }
        }
    }
    if b == 0.0 && c == 0.0 {
        return 1.0;
    }
    2.0 * (a * d - b * c) / ((a + b) * (b + d) + (a + c) * (c + d))
}

/// Shannon entropy (nats) of the labels, and of `x` given `y`, item by item.
fn entropies(x: &[usize], y: &[usize]) -> (f64, f64) {
    let n = x.len() as f64;
    let count = |f: &dyn Fn(usize) -> bool| (0..x.len()).filter(|&i| f(i)).count() as f64;
    let mut h = 0.0;
    let mut h_cond = 0.0;
    for i in 0..x.len() {
        let px = count(&|j| x[j] == x[i]) / n;
        h -= px.ln() / n;
        let p_joint_in_y = count(&|j| x[j] == x[i] && y[j] == y[i]) / count(&|j| y[j] == y[i]);
        h_cond -= p_joint_in_y.ln() / n;
    }
    (h, h_cond)
}

fn metric_oracles() -> Check {
    let mut rng = rng_from_seed(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(1..=10);
        let kt = rng.random_range(1..=4);
        let kp = rng.random_range(1..=4);
        let t: Vec<usize> = (0..n).map(|_| rng.random_range(0..kt)).collect();
        let p: Vec<usize> = (0..n).map(|_| rng.random_range(0..kp)).collect();

        let ari = adjusted_rand_index(&t, &p).map_err(|e| e.to_string())?;
        worst = worst.max((ari - ari_oracle(&t, &p)).abs());

        let (ho, co) = homogeneity_completeness(&t, &p).map_err(|e| e.to_string())?;
        let (h_t, h_t_given_p) = entropies(&t, &p);
        let (h_p, h_p_given_t) = entropies(&p, &t);
        let ho_o = if h_t.abs() < 1e-15 { 1.0 } else { 1.0 - h_t_given_p / h_t };
        let co_o = if h_p.abs() < 1e-15 { 1.0 } else { 1.0 - h_p_given_t / h_p };
        worst = worst.max((ho - ho_o).abs()).max((co - co_o).abs());

        let (bp, br, bf) = bcubed_scores(&t, &p).map_err(|e| e.to_string())?;
        let (mut po, mut ro) = (0.0, 0.0);
        for i in 0..n {
            let both = (0..n).filter(|&j| t[j] == t[i] && p[j] == p[i]).count() as f64;
            po += both / (0..n).filter(|&j| p[j] == p[i]).count() as f64;
            ro += both / (0..n).filter(|&j| t[j] == t[i]).count() as f64;
        }
        po /= n as f64;
        ro /= n as f64;
        let fo = 2.0 * po * ro / (po + ro);
        worst = worst.max((bp - po).abs()).max((br - ro).abs()).max((bf - fo).abs());
    }
    Ok((worst <= 1e-12, format!("200 instances, max |diff| = {worst:.2e}")))
}

fn gradient_checks() -> Check {
    let focal = FocalLoss::default();
    let mut rng = rng_from_seed(7);
    let mut worst: f64 = 0.0;
    let h = 1e-5;
    for _ in 0..20 {
        // Focal loss against its logits.
        let logits = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let target = rng.random_range(0..3);
        let (_, g) = focal.loss_and_grad(&logits, target);
        for k in 0..3 {
            let (mut up, mut down) = (logits, logits);
            up[k] += h;
            down[k] -= h;
            let num = (focal.loss_and_grad(&up, target).0 - focal.loss_and_grad(&down, target).0) / (2.0 * h);
            worst = worst.max(rel_err(num, g[k]));
        }
        // Both taggers through the whole sequence.
        let t = rng.random_range(1..=5);
        let x = Array2::from_shape_fn((t, 6), |_| rng.random_range(-1.0..1.0));
        let tags: Vec<BioTag> = (0..t).map(|_| BioTag::from_index(rng.random_range(0..3)).unwrap()).collect();
        for kind in [ModelKind::Fnn, ModelKind::Bilstm] {
            let mut m = Tagger::init(kind, 6, 4, &mut rng);
            let (_, ana) = m.loss_and_grad(x.view(), &tags, &focal).map_err(|e| e.to_string())?;
            for k in 0..ana.len() {
                let orig = m.params()[k];
                m.params_mut()[k] = orig + h;
                let up = m.loss_and_grad(x.view(), &tags, &focal).unwrap().0;
                m.params_mut()[k] = orig - h;
                let down = m.loss_and_grad(x.view(), &tags, &focal).unwrap().0;
                m.params_mut()[k] = orig;
                worst = worst.max(rel_err((up - down) / (2.0 * h), ana[k]));
            }
        }
    }
    Ok((worst <= 1e-4, format!("20 instances, max relative error = {worst:.2e}")))
}

/// Minimum spanning tree weight by decoding every Prüfer sequence.
fn brute_force_mst(w: &[Vec<f64>]) -> f64 {
    let n = w.len();
    if n == 1 {
        return 0.0;
    }
    if n == 2 {
        return w[0][1];
    }
    let mut best = f64::INFINITY;
    let mut seq = vec![0usize; n - 2];
    loop {
        let mut degree = vec![1usize; n];
        for &s in &seq {
            degree[s] += 1;
        }
        let mut total = 0.0;
        for &s in &seq {
            let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
            total += w[leaf][s];
            degree[leaf] = 0;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
        total += w[rest[0]][rest[1]];
        best = best.min(total);
        // Next sequence in odometer order.
        let mut i = 0;
        while i < seq.len() && seq[i] == n - 1 {
            seq[i] = 0;
            i += 1;
        }
        if i == seq.len() {
            return best;
        }
        seq[i] += 1;
    }
}

fn hdbscan_correctness() -> Check {
    let mut rng = rng_from_seed(99);
    let mut worst: f64 = 0.0;
    let mut size_violations = 0;
    let mut scale_mismatches = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let x = Array2::from_shape_fn((n, 2), |(i, _)| (i % 2) as f64 * 5.0 + rng.random_range(0.0..1.0));
        let cfg = HdbscanConfig {
            min_cluster_size: rng.random_range(2..=n.clamp(2, 4)),
            min_samples: rng.random_range(1..=n.min(3)),
        };
        let res = hdbscan(&x, &cfg).map_err(|e| e.to_string())?;

        let dist: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| (&x.row(i) - &x.row(j)).mapv(|v| v * v).sum().sqrt()).collect())
            .collect();
        let core: Vec<f64> = dist
            .iter()
            .map(|row| {
                let mut r = row.clone();
                r.sort_by(f64::total_cmp);
                r[cfg.min_samples - 1]
            })
            .collect();
        let mreach: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| dist[i][j].max(core[i]).max(core[j])).collect())
            .collect();
        worst = worst.max((res.mst_weight() - brute_force_mst(&mreach)).abs());

        let mut sizes: HashMap<i64, usize> = HashMap::new();
        for &l in res.assignment.labels().iter().filter(|&&l| l != NOISE) {
            *sizes.entry(l).or_default() += 1;
        }
        size_violations += sizes.values().filter(|&&s| s < cfg.min_cluster_size).count();

        let scaled = hdbscan(&x.mapv(|v| v * 1000.0), &cfg).map_err(|e| e.to_string())?;
        if scaled.assignment.labels() != res.assignment.labels() {
            scale_mismatches += 1;
        }
    }
    Ok((
        worst <= 1e-9 && size_violations == 0 && scale_mismatches == 0,
        format!(
            "100 instances, max |MST diff| = {worst:.2e}, undersized clusters = {size_violations}, \
             label changes under x1000 = {scale_mismatches}"
        ),
    ))
}

fn topic_recovery() -> Check {
    let corpus = common::topic_corpus(12, 10, 30, 5);
    let run = |model, k| {
        let cfg = TopicConfig {
            model,
            k,
            ..TopicConfig::default()
        };
        run_topic_stage(&corpus, &cfg, &[argmine::metrics::NoiseMode::WithNoiseSingleCluster], 17)
            .map_err(|e| e.to_string())
    };
    let truth: Vec<&str> = corpus.documents.iter().map(|d| d.topic.as_str()).collect();
    let ari = |out: &argmine::pipeline::TopicStageOutput| adjusted_rand_index(&truth, out.assignment.labels()).map_err(|e| e.to_string());
    // Both HDBSCAN variants must pass: with and without the UMAP step.
    let raw = run(TopicModel::HdbscanTfidf, None)?;
    let umap = run(TopicModel::HdbscanUmap, None)?;
    let km = run(TopicModel::KmeansTfidf, Some(12))?;
    let (ari_r, ari_u, ari_k) = (ari(&raw)?, ari(&umap)?, ari(&km)?);
    let (noise_r, noise_u) = (raw.assignment.noise_fraction(), umap.assignment.noise_fraction());
    Ok((
        ari_r >= 0.9 && ari_u >= 0.9 && ari_k >= 0.9 && noise_r <= 0.1 && noise_u <= 0.1,
        format!(
            "hdbscan ARI={ari_r:.4} noise={noise_r:.3}; hdbscan+umap ARI={ari_u:.4} noise={noise_u:.3}; kmeans ARI={ari_k:.4}"
        ),
    ))
}

fn segmentation_learnability() -> Check {
    let corpus = common::cue_corpus(200, 10, &common::filler_clear_of_cues(64, 8), 3);
    let split = split_by_topic(&corpus, 0.2, 0.1, 4).map_err(|e| e.to_string())?;
    let ids: Vec<String> = corpus
        .documents
        .iter()
        .flat_map(|d| (0..d.sentences.len()).map(|i| d.sentence_id(i)))
        .collect();
    let texts: Vec<&str> = corpus.documents.iter().flat_map(|d| d.sentences.iter().map(|s| s.text.as_str())).collect();
    let emb = hash_embed(ids, &texts, 64, 8).map_err(|e| e.to_string())?;
    let cfg = SegmentConfig {
        model: ModelKind::Bilstm,
        embedding: EmbeddingKind::HashTest,
        train: TrainConfig {
            epochs: 100,
            hidden: 32,
            ..TrainConfig::default()
        },
        compare_fnn: true,
        test_corpus: None,
    };
    let out = run_segment_stage(&corpus, &split, None, &emb, &cfg, 12).map_err(|e| e.to_string())?;
    let bilstm = out.eval.f1_macro_bi;
    let fnn = out.fnn.as_ref().map(|e| e.f1_macro_bi).ok_or("no baseline score")?;
    Ok((
        bilstm >= 0.9 && bilstm > fnn,
        format!("held-out topics {:?}: bilstm f1_macro_BI={bilstm:.4}, fnn={fnn:.4}", split.test),
    ))
}

fn aspect_grid() -> Check {
    let corpus = common::aspect_corpus(5, 3, 8, false, 21);
    let topics: Vec<String> = corpus.topics().into_iter().collect();
    let split = argmine::corpus::SplitSpec {
        seed: 0,
        train: topics[..3].to_vec(),
        val: topics[3..4].to_vec(),
        test: topics[4..].to_vec(),
    };
    let cfg = AspectStageConfig {
        source: ArgumentSource::Gold,
        clustering: ArgclustConfig {
            grid: Grid::Preset(GridPreset::Standard),
            evaluate_on: EvaluateOn::All,
            ..ArgclustConfig::default()
        },
    };
    let pcfg = PipelineConfig::default();
    let mut emb = BTreeMap::new();
    for kind in [EmbeddingKind::BertCls, EmbeddingKind::BertAvg] {
        emb.insert(kind, sentence_embeddings(&pcfg, kind, &[&corpus]).map_err(|e| e.to_string())?);
    }
    let out = run_argclust_stage(&corpus, &split, None, &emb, &cfg, 3).map_err(|e| e.to_string())?;
    let tfidf_hdbscan: Vec<f64> = out
        .grid
        .rows
        .iter()
        .filter(|r| r.row.config.embedding == EmbeddingKind::Tfidf && r.row.config.algorithm == Algorithm::Hdbscan)
        .map(|r| r.ari)
        .collect();
    let min_ari = tfidf_hdbscan.iter().copied().fold(f64::INFINITY, f64::min);
    let reg = fit_k_regression(&[(2, 1), (4, 2), (6, 3)]).map_err(|e| e.to_string())?;
    let rows = out.grid.rows.len();
    Ok((
        min_ari >= 0.9 && reg.slope == 0.5 && reg.intercept == 0.0 && rows == 12,
        format!(
            "tf-idf+HDBSCAN mean ARI per row {tfidf_hdbscan:.4?}; regression slope={} intercept={}; {rows} rows",
            reg.slope, reg.intercept
        ),
    ))
}

fn pipeline_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus_path = dir.path().join("corpus.jsonl");
    save_corpus(&common::aspect_corpus(6, 3, 6, true, 31), &corpus_path).map_err(|e| e.to_string())?;
    let config = serde_json::json!({
        "corpus": "corpus.jsonl",
        "seed": 42,
        "topics": {"model": "hdbscan_umap", "queries": ["topic0aspect1word3", "nothing"]},
        "segment": {"embedding": "hash_test", "compare_fnn": true, "train": {"epochs": 15, "hidden": 16}},
        "argclust": {"clustering": {"evaluate_on": "all"}}
    });
    let config_path = dir.path().join("config.json");
    fs::write(&config_path, config.to_string()).map_err(|e| e.to_string())?;

    let mut trees = Vec::new();
    for name in ["run_a", "run_b"] {
        let mut cfg = PipelineConfig::load(&config_path).map_err(|e| e.to_string())?;
        cfg.output_dir = dir.path().join(name);
        run_pipeline(&cfg, &[Stage::Topics, Stage::Segment, Stage::Argclust]).map_err(|e| e.to_string())?;
        let mut files = BTreeMap::new();
        for rel in output_files(&cfg.output_dir).map_err(|e| e.to_string())? {
            if rel.as_os_str() != "run_meta.json" {
                files.insert(rel.clone(), fs::read(cfg.output_dir.join(&rel)).map_err(|e| e.to_string())?);
            }
        }
        trees.push(files);
    }
    let differing: BTreeSet<_> = trees[0]
        .keys()
        .chain(trees[1].keys())
        .filter(|k| trees[0].get(*k) != trees[1].get(*k))
        .collect();
    Ok((
        differing.is_empty() && trees[0].len() >= 14,
        format!("{} files compared, differing: {differing:?}", trees[0].len()),
    ))
}

fn main() -> ExitCode {
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(&str, u64, fn() -> Check); 8] = [
        ("majority-baseline parity", 1, majority_baseline_parity),
        ("metric oracle suite", 10, metric_oracles),
        ("gradient checks", 30, gradient_checks),
        ("hdbscan correctness", 30, hdbscan_correctness),
        ("topic-clustering recovery", 60, topic_recovery),
        ("segmentation learnability", 300, segmentation_learnability),
        ("argument-clustering grid", 60, aspect_grid),
        ("pipeline determinism", 120, pipeline_determinism),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(budget);
        let pass = ok && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {name}: {detail} [{:.2}s, budget {budget}s{}]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", over budget" }
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
