//! Annotated corpora: loading, validation, topic-wise splitting.
//!
//! Corpora are stored as JSONL, one document per line:
//!
//! ```text
//! {"doc_id": "d1", "title": "...", "topic": "t", "sentences": [{"text": "...", "bio": "B", "aspect": "cost"}]}
//! ```
//!
//! Documents arrive already split into sentences. [`split_sentences`] is a
//! rule-based helper for raw text and is not used by the evaluated stages.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Sentence-level argument boundary tag. Ordered `B < I < O`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BioTag {
    B,
    I,
    O,
}

impl BioTag {
    pub const ALL: [BioTag; 3] = [BioTag::B, BioTag::I, BioTag::O];

    pub fn index(self) -> usize {
        match self {
            BioTag::B => 0,
            BioTag::I => 1,
            BioTag::O => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<BioTag> {
        BioTag::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BioTag::B => "B",
            BioTag::I => "I",
            BioTag::O => "O",
        }
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bio: Option<BioTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspect: Option<String>,
}

impl Sentence {
    pub fn new(text: impl Into<String>) -> Self {
        Sentence {
            text: text.into(),
            bio: None,
            aspect: None,
        }
    }

    pub fn tagged(text: impl Into<String>, bio: BioTag) -> Self {
        Sentence {
            text: text.into(),
            bio: Some(bio),
            aspect: None,
        }
    }

    pub fn with_aspect(mut self, aspect: impl Into<String>) -> Self {
        self.aspect = Some(aspect.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub topic: String,
    pub sentences: Vec<Sentence>,
}

impl Document {
    /// `true` when every sentence carries a BIO tag.
    pub fn is_tagged(&self) -> bool {
        !self.sentences.is_empty() && self.sentences.iter().all(|s| s.bio.is_some())
    }

    /// Gold tags, or `None` for an untagged document.
    pub fn tags(&self) -> Option<Vec<BioTag>> {
        self.sentences.iter().map(|s| s.bio).collect()
    }

    /// Sentences joined by single spaces.
    pub fn text(&self) -> String {
        let parts: Vec<&str> = self.sentences.iter().map(|s| s.text.as_str()).collect();
        parts.join(" ")
    }

    pub fn sentence_id(&self, index: usize) -> String {
        sentence_id(&self.doc_id, index)
    }

    fn validate(&self) -> Result<()> {
        if self.sentences.is_empty() {
            return Err(Error::Invariant(format!(
                "document {:?} has no sentences",
                self.doc_id
            )));
        }
        for (i, s) in self.sentences.iter().enumerate() {
            if s.text.trim().is_empty() {
                return Err(Error::Invariant(format!(
                    "document {:?} sentence {i} is blank",
                    self.doc_id
                )));
            }
        }
        let tagged = self.sentences.iter().filter(|s| s.bio.is_some()).count();
        if tagged != 0 && tagged != self.sentences.len() {
            return Err(Error::Invariant(format!(
                "document {:?} mixes tagged and untagged sentences ({tagged} of {} tagged)",
                self.doc_id,
                self.sentences.len()
            )));
        }
        Ok(())
    }
}

/// Embedding-file key of a sentence: `<doc_id>#<index>`.
pub fn sentence_id(doc_id: &str, index: usize) -> String {
    format!("{doc_id}#{index}")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub name: String,
    pub documents: Vec<Document>,
}

impl Corpus {
    /// Builds a corpus and checks every document invariant.
    pub fn new(name: impl Into<String>, documents: Vec<Document>) -> Result<Corpus> {
        let corpus = Corpus {
            name: name.into(),
            documents,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for doc in &self.documents {
            if !seen.insert(doc.doc_id.as_str()) {
                return Err(Error::Invariant(format!(
                    "duplicate doc_id {:?}",
                    doc.doc_id
                )));
            }
            doc.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Topic labels in sorted order.
    pub fn topics(&self) -> BTreeSet<String> {
        self.documents.iter().map(|d| d.topic.clone()).collect()
    }

    pub fn sentence_count(&self) -> usize {
        self.documents.iter().map(|d| d.sentences.len()).sum()
    }

    /// Sub-corpus of the documents whose topic is in `topics`, original order kept.
    pub fn select<S: AsRef<str>>(&self, topics: &[S]) -> Result<Corpus> {
        let known = self.topics();
        let mut wanted = HashSet::new();
        for t in topics {
            let t = t.as_ref();
            if !known.contains(t) {
                return Err(Error::invalid(format!("unknown topic {t:?}")));
            }
            wanted.insert(t.to_string());
        }
        Ok(Corpus {
            name: self.name.clone(),
            documents: self
                .documents
                .iter()
                .filter(|d| wanted.contains(&d.topic))
                .cloned()
                .collect(),
        })
    }
}

/// Reads a JSONL corpus. The corpus name is the file stem.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_corpus(BufReader::new(file), name, path)
}

pub fn read_corpus<R: BufRead>(reader: R, name: String, origin: &Path) -> Result<Corpus> {
    let mut documents = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        documents.push(doc);
    }
    Corpus::new(name, documents)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_corpus(corpus, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_corpus<W: Write>(corpus: &Corpus, w: &mut W) -> std::io::Result<()> {
    for doc in &corpus.documents {
        serde_json::to_writer(&mut *w, doc)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Disjoint train/validation/test topic sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl SplitSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<SplitSpec> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("split serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Checks the three sets partition the corpus topics.
    pub fn check_partition(&self, corpus: &Corpus) -> Result<()> {
        let mut seen = BTreeSet::new();
        for t in self.train.iter().chain(&self.val).chain(&self.test) {
            if !seen.insert(t.clone()) {
                return Err(Error::invalid(format!("topic {t:?} appears in two splits")));
            }
        }
        if seen != corpus.topics() {
            return Err(Error::invalid(
                "split topics do not cover the corpus topic set",
            ));
        }
        Ok(())
    }
}

/// Sidecar split file next to a corpus: `<dir>/<stem>.split.json`.
pub fn split_sidecar_path(corpus_path: &Path) -> PathBuf {
    let stem = corpus_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into());
    corpus_path.with_file_name(format!("{stem}.split.json"))
}

pub(crate) fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Seeded topic-wise split.
///
/// Sorted topics are shuffled with a ChaCha8 stream seeded by `seed`; the
/// first `round(test_frac * n)` shuffled topics (at least one) go to test,
/// the next `round(val_frac * n)` (at least one when `val_frac > 0`) to
/// validation, the rest to training. Each output list is sorted.
pub fn split_by_topic(corpus: &Corpus, test_frac: f64, val_frac: f64, seed: u64) -> Result<SplitSpec> {
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(Error::invalid(format!("test_frac {test_frac} not in (0,1)")));
    }
    if !(0.0..1.0).contains(&val_frac) || test_frac + val_frac >= 1.0 {
        return Err(Error::invalid(format!(
            "val_frac {val_frac} invalid with test_frac {test_frac}"
        )));
    }
    let mut topics: Vec<String> = corpus.topics().into_iter().collect();
    let n = topics.len();
    let n_test = round_half_up(test_frac * n as f64).max(1);
    let n_val = if val_frac > 0.0 {
        round_half_up(val_frac * n as f64).max(1)
    } else {
        0
    };
    if n_test + n_val >= n {
        return Err(Error::invalid(format!(
            "{n} topics cannot hold {n_test} test and {n_val} validation topics plus a training topic"
        )));
    }
    let mut rng = rng_from_seed(seed);
    topics.shuffle(&mut rng);
    let mut test = topics[..n_test].to_vec();
    let mut val = topics[n_test..n_test + n_val].to_vec();
    let mut train = topics[n_test + n_val..].to_vec();
    test.sort();
    val.sort();
    train.sort();
    Ok(SplitSpec {
        seed,
        train,
        val,
        test,
    })
}

const ABBREVIATIONS: [&str; 30] = [
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "e.g", "i.e", "cf", "al",
    "fig", "no", "vol", "approx", "dept", "est", "inc", "ltd", "co", "corp", "jan", "feb", "aug",
    "sept", "oct", "nov",
];

fn is_quote(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201c}' | '\u{2018}' | '\u{00ab}')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | '\u{201d}' | '\u{2019}' | '\u{00bb}')
}

/// Rule-based sentence splitter for raw text.
///
/// Breaks after a run of `.`, `!` or `?` (plus optional closing quotes or
/// brackets) when whitespace follows and the next character is uppercase or
/// an opening quote. A `.` ending one of 30 common abbreviations never
/// breaks.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (_, c) = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        let term_start = i;
        let mut j = i;
        while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?') {
            j += 1;
        }
        while j < chars.len() && is_closer(chars[j].1) {
            j += 1;
        }
        let end_byte = chars.get(j).map_or(text.len(), |&(b, _)| b);
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let boundary = k > j
            && k < chars.len()
            && (chars[k].1.is_uppercase() || is_quote(chars[k].1))
            && !(chars[term_start].1 == '.' && j == term_start + 1 && ends_with_abbreviation(&text[..chars[term_start].0]));
        if boundary {
            let piece = text[start..end_byte].trim();
            if !piece.is_empty() {
                out.push(piece.to_string());
            }
            start = chars[k].0;
            i = k;
        } else {
            i = j.max(i + 1);
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

fn ends_with_abbreviation(before: &str) -> bool {
    let word = before
        .rsplit(|c: char| c.is_whitespace() || c == '(' || is_quote(c))
        .next()
        .unwrap_or("");
    let word = word.to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}
