//! Seeded synthetic corpora shared by the integration suites.
#![allow(dead_code)]

use argmine::corpus::{BioTag, Corpus, Document, Sentence};
use argmine::rng::{rng_from_seed, StageRng as ChaCha};
use argmine::vectorize::hash_embed;
use rand::seq::IndexedRandom;
use rand::Rng;

pub const CUES: [&str; 5] = ["firstly", "secondly", "however", "moreover", "furthermore"];

const FILLER: [&str; 24] = [
    "people", "should", "would", "think", "because", "there", "their", "which", "about", "could", "other", "these",
    "many", "some", "also", "more", "time", "years", "world", "state", "public", "those", "every", "often",
];

fn words<R: Rng>(rng: &mut R, pool: &[String], n: usize) -> String {
    (0..n).map(|_| pool.choose(rng).unwrap().as_str()).collect::<Vec<_>>().join(" ")
}

/// Draws `n` words with Zipfian weights `1 / rank`, as in natural text.
fn zipf_words<R: Rng>(rng: &mut R, pool: &[String], n: usize) -> String {
    let weights: Vec<f64> = (1..=pool.len()).map(|r| 1.0 / r as f64).collect();
    let total: f64 = weights.iter().sum();
    (0..n)
        .map(|_| {
            let mut u = rng.random::<f64>() * total;
            let i = weights.iter().position(|&w| {
                u -= w;
                u < 0.0
            });
            pool[i.unwrap_or(pool.len() - 1)].as_str()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// `n_topics` topics with disjoint vocabularies of 20 words; every document
/// is `tokens` words drawn uniformly from its topic, split into three
/// sentences.
pub fn topic_corpus(n_topics: usize, docs_per_topic: usize, tokens: usize, seed: u64) -> Corpus {
    let mut rng = rng_from_seed(seed);
    let mut docs = Vec::new();
    for t in 0..n_topics {
        let vocab: Vec<String> = (0..20).map(|w| format!("topic{t}word{w}")).collect();
        for d in 0..docs_per_topic {
            let per = tokens / 3;
            let sentences = (0..3)
                .map(|s| Sentence::new(words(&mut rng, &vocab, if s == 2 { tokens - 2 * per } else { per })))
                .collect();
            docs.push(Document {
                doc_id: format!("t{t:02}-d{d:02}"),
                title: format!("topic {t}"),
                topic: format!("topic{t:02}"),
                sentences,
            });
        }
    }
    Corpus::new("topics", docs).unwrap()
}

fn filler_sentence<R: Rng>(rng: &mut R, topic_words: &[String]) -> String {
    let pool: Vec<String> = FILLER.iter().map(|s| s.to_string()).collect();
    let n = rng.random_range(4..=6);
    match topic_words.choose(rng) {
        Some(t) => format!("{} {t}", words(rng, &pool, n)),
        None => words(rng, &pool, n),
    }
}

/// Filler words whose feature-hashing bucket (for `dim` and `seed`) differs
/// from that of every cue and of the conclusion marker, so no filler can
/// mask or mimic a cue in [`hash_embed`] vectors.
pub fn filler_clear_of_cues(dim: usize, seed: u64) -> Vec<&'static str> {
    let bucket = |w: &str| {
        let e = hash_embed(vec![w.to_string()], &[w], dim, seed).unwrap();
        e.matrix().row(0).iter().position(|&v| v != 0.0).unwrap()
    };
    let reserved: Vec<usize> = CUES.iter().chain(&[MARKER]).map(|w| bucket(w)).collect();
    FILLER.iter().copied().filter(|w| !reserved.contains(&bucket(w))).collect()
}

const MARKER: &str = "overall";

/// BIO corpus where every argument opens with one of [`CUES`].
///
/// A document is an introduction of 1-3 `O` sentences, 2-4 arguments of a
/// cue sentence (`B`) followed by 1-3 `I` sentences, then optionally a
/// conclusion marked by "overall" plus 0-2 more `O` sentences. `I` and `O`
/// sentences share one distribution over `filler`, so telling them apart
/// needs context. Topics only label documents for splitting.
pub fn cue_corpus(n_docs: usize, n_topics: usize, filler: &[&str], seed: u64) -> Corpus {
    let mut rng = rng_from_seed(seed);
    let pool: Vec<String> = filler.iter().map(|s| s.to_string()).collect();
    let sentence = |rng: &mut ChaCha| {
        let n = rng.random_range(5..=7);
        words(rng, &pool, n)
    };
    let mut docs = Vec::new();
    for d in 0..n_docs {
        let mut sentences = Vec::new();
        for _ in 0..rng.random_range(1..=3) {
            sentences.push(Sentence::tagged(sentence(&mut rng), BioTag::O));
        }
        for _ in 0..rng.random_range(2..=4) {
            let cue = CUES.choose(&mut rng).unwrap();
            sentences.push(Sentence::tagged(format!("{cue} {}", sentence(&mut rng)), BioTag::B));
            for _ in 0..rng.random_range(1..=3) {
                sentences.push(Sentence::tagged(sentence(&mut rng), BioTag::I));
            }
        }
        if rng.random_bool(0.5) {
            sentences.push(Sentence::tagged(format!("{MARKER} {}", sentence(&mut rng)), BioTag::O));
            for _ in 0..rng.random_range(0..=2) {
                sentences.push(Sentence::tagged(sentence(&mut rng), BioTag::O));
            }
        }
        docs.push(Document {
            doc_id: format!("doc{d:03}"),
            title: String::new(),
            topic: format!("topic{:02}", d % n_topics),
            sentences,
        });
    }
    Corpus::new("cue", docs).unwrap()
}

/// Aspect-annotated BIO corpus: per topic, `n_aspects` aspects with disjoint
/// vocabularies of 12 Zipf-distributed words and `per_aspect` arguments each. Arguments are one or two
/// sentences, shuffled into documents of 2-4 arguments that open with an
/// `O` sentence. With `cues`, arguments begin with a cue word so a tagger
/// can find them; cue words are shared across aspects.
pub fn aspect_corpus(n_topics: usize, n_aspects: usize, per_aspect: usize, cues: bool, seed: u64) -> Corpus {
    use rand::seq::SliceRandom;
    let mut rng = rng_from_seed(seed);
    let mut docs = Vec::new();
    for t in 0..n_topics {
        let topic_words: Vec<String> = (0..8).map(|w| format!("subject{t}term{w}")).collect();
        let mut args: Vec<usize> = (0..n_aspects).flat_map(|a| std::iter::repeat(a).take(per_aspect)).collect();
        args.shuffle(&mut rng);
        let mut d = 0;
        let mut rest = &args[..];
        while !rest.is_empty() {
            let take = rng.random_range(2..=4).min(rest.len());
            let (chunk, tail) = rest.split_at(take);
            rest = tail;
            let mut sentences = vec![Sentence::tagged(filler_sentence(&mut rng, &topic_words), BioTag::O)];
            for &a in chunk {
                let vocab: Vec<String> = (0..12).map(|w| format!("topic{t}aspect{a}word{w}")).collect();
                let label = format!("aspect{a}");
                let mut first = zipf_words(&mut rng, &vocab, 6);
                if cues {
                    first = format!("{} {first}", CUES.choose(&mut rng).unwrap());
                }
                sentences.push(Sentence::tagged(first, BioTag::B).with_aspect(&label));
                if rng.random_bool(0.5) {
                    sentences.push(Sentence::tagged(zipf_words(&mut rng, &vocab, 6), BioTag::I).with_aspect(&label));
                }
            }
            docs.push(Document {
                doc_id: format!("t{t}-d{d:02}"),
                title: String::new(),
                topic: format!("topic{t:02}"),
                sentences,
            });
            d += 1;
        }
    }
    Corpus::new("aspects", docs).unwrap()
}

/// Standard normal draw by Box-Muller.
pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// `per` points around each centre with isotropic noise `sigma`; returns the
/// points row-wise and their blob ids.
pub fn blobs(centres: &[Vec<f64>], per: usize, sigma: f64, seed: u64) -> (ndarray::Array2<f64>, Vec<usize>) {
    let mut rng = rng_from_seed(seed);
    let d = centres[0].len();
    let mut x = ndarray::Array2::zeros((centres.len() * per, d));
    let mut ids = Vec::new();
    for (b, c) in centres.iter().enumerate() {
        for i in 0..per {
            for j in 0..d {
                x[[b * per + i, j]] = c[j] + sigma * normal(&mut rng);
            }
            ids.push(b);
        }
    }
    (x, ids)
}
