//! Document and sentence vectors.
//!
//! Three sources feed the clustering and tagging stages:
//! tf-idf over a pruned vocabulary, precomputed transformer sentence
//! embeddings read from TSV, and a seeded feature-hashing embedder used
//! wherever transformer vectors are unavailable (tests, smoke runs).

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{fnv1a64, mix64};

/// Lowercased maximal runs of letters/digits, dropping tokens shorter than 2 chars.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    pub terms: Vec<String>,
    pub term_to_index: HashMap<String, usize>,
    pub doc_freq: Vec<usize>,
    pub n_docs: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index(&self, term: &str) -> Option<usize> {
        self.term_to_index.get(term).copied()
    }

    /// Smoothed idf: `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self) -> Vec<f64> {
        let n = self.n_docs as f64;
        self.doc_freq
            .iter()
            .map(|&df| ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0)
            .collect()
    }
}

/// Builds a vocabulary, pruning by document frequency then by total count.
///
/// Terms with `df / n_docs > max_df` are dropped. If more than
/// `max_features` remain, the most frequent by total count survive, ties
/// going to the lexicographically smaller term.
pub fn build_vocab(docs: &[Vec<String>], max_features: Option<usize>, max_df: f64) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::invalid("cannot build a vocabulary from zero documents"));
    }
    if !(max_df > 0.0 && max_df <= 1.0) {
        return Err(Error::invalid(format!("max_df {max_df} not in (0,1]")));
    }
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for doc in docs {
        let mut seen: Vec<&str> = Vec::with_capacity(doc.len());
        for tok in doc {
            counts.entry(tok.as_str()).or_default().0 += 1;
            seen.push(tok.as_str());
        }
        seen.sort_unstable();
        seen.dedup();
        for tok in seen {
            counts.get_mut(tok).expect("counted above").1 += 1;
        }
    }
    let n_docs = docs.len();
    let mut kept: Vec<(&str, usize, usize)> = counts
        .into_iter()
        .filter(|&(_, (_, df))| df as f64 / n_docs as f64 <= max_df)
        .map(|(t, (total, df))| (t, total, df))
        .collect();
    if let Some(limit) = max_features {
        if kept.len() > limit {
            kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            kept.truncate(limit);
        }
    }
    if kept.is_empty() {
        return Err(Error::invalid("vocabulary is empty after max_df/max_features filtering"));
    }
    kept.sort_by(|a, b| a.0.cmp(b.0));
    let terms: Vec<String> = kept.iter().map(|k| k.0.to_string()).collect();
    let doc_freq = kept.iter().map(|k| k.2).collect();
    let term_to_index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok(Vocabulary {
        terms,
        term_to_index,
        doc_freq,
        n_docs,
    })
}

/// Raw-count tf times smoothed idf, each row L2-normalized. Rows without
/// any vocabulary term stay zero.
pub fn tfidf_matrix(docs: &[Vec<String>], vocab: &Vocabulary) -> Array2<f64> {
    let idf = vocab.idf();
    let mut x = Array2::<f64>::zeros((docs.len(), vocab.len()));
    for (i, doc) in docs.iter().enumerate() {
        let mut row = x.row_mut(i);
        for tok in doc {
            if let Some(j) = vocab.index(tok) {
                row[j] += 1.0;
            }
        }
        for (j, v) in row.iter_mut().enumerate() {
            *v *= idf[j];
        }
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    x
}

pub fn tfidf(ids: &[String], docs: &[Vec<String>], vocab: &Vocabulary) -> Result<EmbeddingSet> {
    EmbeddingSet::new(EmbeddingKind::Tfidf, ids.to_vec(), tfidf_matrix(docs, vocab))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Tfidf,
    BertCls,
    BertAvg,
    HashTest,
}

impl EmbeddingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingKind::Tfidf => "tfidf",
            EmbeddingKind::BertCls => "bert_cls",
            EmbeddingKind::BertAvg => "bert_avg",
            EmbeddingKind::HashTest => "hash_test",
        }
    }
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tfidf" => Ok(EmbeddingKind::Tfidf),
            "bert_cls" | "cls" => Ok(EmbeddingKind::BertCls),
            "bert_avg" | "avg" => Ok(EmbeddingKind::BertAvg),
            "hash_test" => Ok(EmbeddingKind::HashTest),
            other => Err(Error::invalid(format!("unknown embedding kind {other:?}"))),
        }
    }
}

/// Id-indexed dense vectors sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    kind: EmbeddingKind,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Array2<f64>,
}

impl EmbeddingSet {
    pub fn new(kind: EmbeddingKind, ids: Vec<String>, data: Array2<f64>) -> Result<EmbeddingSet> {
        if ids.len() != data.nrows() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rows", ids.len()),
                got: format!("{} rows", data.nrows()),
            });
        }
        if data.ncols() == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate embedding id {id:?}")));
            }
            if data.row(i).iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("non-finite component in embedding {id:?}")));
            }
        }
        Ok(EmbeddingSet {
            kind,
            ids,
            index,
            data,
        })
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    /// Reassigns the kind tag (e.g. hash vectors standing in for a transformer kind).
    pub fn with_kind(mut self, kind: EmbeddingKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn get(&self, id: &str) -> Option<ArrayView1<'_, f64>> {
        self.index.get(id).map(|&i| self.data.row(i))
    }

    /// Vector for `id` or an error naming it.
    pub fn require(&self, id: &str) -> Result<ArrayView1<'_, f64>> {
        self.get(id)
            .ok_or_else(|| Error::invalid(format!("no embedding for id {id:?}")))
    }

    /// Stacks the vectors of `ids` in order.
    pub fn gather<S: AsRef<str>>(&self, ids: &[S]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((ids.len(), self.dim()));
        for (r, id) in ids.iter().enumerate() {
            out.row_mut(r).assign(&self.require(id.as_ref())?);
        }
        Ok(out)
    }

    /// L2-normalizes every non-zero row.
    pub fn normalized(mut self) -> Self {
        for mut row in self.data.rows_mut() {
            let n = row.dot(&row).sqrt();
            if n > 0.0 {
                row.mapv_inplace(|v| v / n);
            }
        }
        self
    }
}

pub fn save_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_embeddings(set, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// TSV writer. `f64`'s `Display` is the shortest round-trip decimal form.
pub fn write_embeddings<W: Write>(set: &EmbeddingSet, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "#dim={}\t#kind={}", set.dim(), set.kind())?;
    for (id, row) in set.ids.iter().zip(set.data.rows()) {
        write!(w, "{id}\t")?;
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                w.write_all(b" ")?;
            }
            write!(w, "{v}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads an embedding TSV; every id in `expected_ids` must be present.
pub fn load_embeddings<S: AsRef<str>>(path: impl AsRef<Path>, expected_ids: &[S]) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let set = read_embeddings(BufReader::new(file), path)?;
    for id in expected_ids {
        set.require(id.as_ref())?;
    }
    Ok(set)
}

pub fn read_embeddings<R: BufRead>(reader: R, origin: &Path) -> Result<EmbeddingSet> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l.map_err(|e| Error::io(origin, e))?,
        None => return Err(parse_err(1, "missing header".into())),
    };
    let (dim, kind) = parse_header(header.trim_end_matches('\r')).map_err(|m| parse_err(1, m))?;
    let mut ids = Vec::new();
    let mut flat = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (id, values) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(i + 1, "row lacks a tab separator".into()))?;
        let before = flat.len();
        for tok in values.split_ascii_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(i + 1, format!("row {id:?}: bad float {tok:?}")))?;
            if !v.is_finite() {
                return Err(Error::Numeric(format!("row {id:?}: non-finite value {tok}")));
            }
            flat.push(v);
        }
        let got = flat.len() - before;
        if got != dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{dim} values"),
                got: format!("{got} values in row {id:?}"),
            });
        }
        ids.push(id.to_string());
    }
    let data = Array2::from_shape_vec((ids.len(), dim), flat).expect("row lengths checked");
    EmbeddingSet::new(kind, ids, data)
}

fn parse_header(line: &str) -> std::result::Result<(usize, EmbeddingKind), String> {
    let mut dim = None;
    let mut kind = None;
    for field in line.split('\t') {
        if let Some(v) = field.strip_prefix("#dim=") {
            dim = Some(v.parse::<usize>().map_err(|_| format!("bad dim {v:?}"))?);
        } else if let Some(v) = field.strip_prefix("#kind=") {
            kind = Some(v.parse::<EmbeddingKind>().map_err(|e| e.to_string())?);
        }
    }
    match (dim, kind) {
        (Some(0), _) => Err("dim must be positive".into()),
        (Some(d), Some(k)) => Ok((d, k)),
        _ => Err(format!("header must be '#dim=<D>\\t#kind=<kind>', got {line:?}")),
    }
}

/// Seeded feature-hashing sentence embedder.
///
/// Each token maps to a bucket and a sign through a seeded 64-bit hash; the
/// sentence vector is the mean of the signed one-hot bucket vectors,
/// L2-normalized. Token order does not matter.
pub fn hash_embed<S: AsRef<str>>(ids: Vec<String>, sentences: &[S], dim: usize, seed: u64) -> Result<EmbeddingSet> {
    if dim < 8 {
        return Err(Error::invalid(format!("hash embedding dim {dim} < 8")));
    }
    if ids.len() != sentences.len() {
        return Err(Error::invalid("ids and sentences differ in length"));
    }
    let salt = mix64(seed);
    let mut data = Array2::<f64>::zeros((sentences.len(), dim));
    for (r, s) in sentences.iter().enumerate() {
        let tokens = tokenize(s.as_ref());
        if tokens.is_empty() {
            continue;
        }
        let mut row = data.row_mut(r);
        for tok in &tokens {
            let h = mix64(fnv1a64(tok.as_bytes()) ^ salt);
            let bucket = (h % dim as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            row[bucket] += sign;
        }
        let scale = tokens.len() as f64;
        row.mapv_inplace(|v| v / scale);
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    EmbeddingSet::new(EmbeddingKind::HashTest, ids, data)
}
