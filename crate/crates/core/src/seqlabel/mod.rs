//! Sentence-level BIO tagging of documents into arguments.

mod checkpoint;
mod fnn;
mod focal;
mod lstm;
mod train;

use std::ops::Range;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::corpus::{BioTag, Document};
use crate::error::{Error, Result};
use crate::vectorize::EmbeddingSet;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, write_loss_trace};
pub use fnn::Fnn;
pub use focal::FocalLoss;
pub use lstm::BiLstm;
pub use train::{train, train_sequences, Adagrad, EpochLoss, TrainConfig, TrainOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Bilstm,
    Fnn,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Bilstm => "bilstm",
            ModelKind::Fnn => "fnn",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bilstm" => Ok(ModelKind::Bilstm),
            "fnn" => Ok(ModelKind::Fnn),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

/// A trained (or freshly initialized) tagger.
#[derive(Debug, Clone, PartialEq)]
pub enum Tagger {
    Bilstm(BiLstm),
    Fnn(Fnn),
}

impl Tagger {
    pub fn init<R: rand::Rng>(kind: ModelKind, input_dim: usize, hidden: usize, rng: &mut R) -> Tagger {
        match kind {
            ModelKind::Bilstm => Tagger::Bilstm(BiLstm::init(input_dim, hidden, rng)),
            ModelKind::Fnn => Tagger::Fnn(Fnn::init(input_dim, hidden, rng)),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Tagger::Bilstm(_) => ModelKind::Bilstm,
            Tagger::Fnn(_) => ModelKind::Fnn,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Tagger::Bilstm(m) => m.input_dim,
            Tagger::Fnn(m) => m.input_dim,
        }
    }

    pub fn hidden(&self) -> usize {
        match self {
            Tagger::Bilstm(m) => m.hidden,
            Tagger::Fnn(m) => m.hidden,
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Tagger::Bilstm(m) => &m.theta,
            Tagger::Fnn(m) => &m.theta,
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Tagger::Bilstm(m) => &mut m.theta,
            Tagger::Fnn(m) => &mut m.theta,
        }
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.nrows() == 0 {
            return Err(Error::invalid("cannot tag an empty sequence"));
        }
        if x.ncols() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} input features", self.input_dim()),
                got: format!("{}", x.ncols()),
            });
        }
        Ok(())
    }

    /// Logits, one row of three per sentence.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        Ok(match self {
            Tagger::Bilstm(m) => m.forward(x),
            Tagger::Fnn(m) => m.forward(x),
        })
    }

    /// Mean per-sentence focal loss of one sequence and its parameter gradient.
    pub fn loss_and_grad(&self, x: ArrayView2<f64>, tags: &[BioTag], loss: &FocalLoss) -> Result<(f64, Vec<f64>)> {
        let logits = self.forward(x)?;
        let (value, dlogits) = sequence_loss(&logits, tags, loss);
        let grad = match self {
            Tagger::Bilstm(m) => m.backward(x, &dlogits),
            Tagger::Fnn(m) => m.backward(x, &dlogits),
        };
        Ok((value, grad))
    }

    /// Summed (not averaged) sentence losses of one sequence.
    pub fn loss_sum(&self, x: ArrayView2<f64>, tags: &[BioTag], loss: &FocalLoss) -> Result<f64> {
        let logits = self.forward(x)?;
        Ok((0..tags.len())
            .map(|t| loss.loss_and_grad(&row3(&logits, t), tags[t].index()).0)
            .sum())
    }
}

fn row3(logits: &Array2<f64>, t: usize) -> [f64; 3] {
    [logits[[t, 0]], logits[[t, 1]], logits[[t, 2]]]
}

/// Mean focal loss over the sentences of a sequence and its logit gradient.
pub(crate) fn sequence_loss(logits: &Array2<f64>, tags: &[BioTag], loss: &FocalLoss) -> (f64, Array2<f64>) {
    let n = tags.len() as f64;
    let mut total = 0.0;
    let mut d = Array2::zeros(logits.raw_dim());
    for (t, tag) in tags.iter().enumerate() {
        let (l, g) = loss.loss_and_grad(&row3(logits, t), tag.index());
        total += l;
        for c in 0..3 {
            d[[t, c]] = g[c] / n;
        }
    }
    (total / n, d)
}

/// One document as a feature matrix with its gold tags.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub doc_id: String,
    pub x: Array2<f64>,
    pub tags: Option<Vec<BioTag>>,
}

/// Looks up the sentence vectors of each document.
pub fn build_sequences(docs: &[Document], embeddings: &EmbeddingSet) -> Result<Vec<Sequence>> {
    docs.iter()
        .map(|doc| {
            let ids: Vec<String> = (0..doc.sentences.len()).map(|i| doc.sentence_id(i)).collect();
            Ok(Sequence {
                doc_id: doc.doc_id.clone(),
                x: embeddings.gather(&ids)?,
                tags: doc.tags(),
            })
        })
        .collect()
}

/// Argmax over the three scores; the earliest of B, I, O wins ties.
pub fn decode(logits: &Array2<f64>) -> Vec<BioTag> {
    logits
        .rows()
        .into_iter()
        .map(|r| {
            let mut best = 0;
            for c in 1..3 {
                if r[c] > r[best] {
                    best = c;
                }
            }
            BioTag::from_index(best).expect("three classes")
        })
        .collect()
}

/// Raw per-sentence tags for each document.
pub fn predict_tags(tagger: &Tagger, docs: &[Document], embeddings: &EmbeddingSet) -> Result<Vec<Vec<BioTag>>> {
    build_sequences(docs, embeddings)?
        .iter()
        .map(|s| Ok(decode(&tagger.forward(s.x.view())?)))
        .collect()
}

/// Turns an `I` that opens a document or follows an `O` into `B`.
pub fn repair(tags: &[BioTag]) -> Vec<BioTag> {
    let mut out = tags.to_vec();
    for i in 0..out.len() {
        if out[i] == BioTag::I && (i == 0 || out[i - 1] == BioTag::O) {
            out[i] = BioTag::B;
        }
    }
    out
}

/// Sentence ranges (end exclusive) of the arguments in a tag sequence.
///
/// A stray `I` without a preceding `B` or `I` opens a span, which matches
/// segmenting the repaired sequence.
pub fn segment_arguments(tags: &[BioTag]) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            BioTag::B => {
                if let Some(s) = open.take() {
                    spans.push(s..i);
                }
                open = Some(i);
            }
            BioTag::I => {
                open.get_or_insert(i);
            }
            BioTag::O => {
                if let Some(s) = open.take() {
                    spans.push(s..i);
                }
            }
        }
    }
    if let Some(s) = open {
        spans.push(s..tags.len());
    }
    spans
}

/// Most frequent training tag; ties go to the earlier of B, I, O.
pub fn majority_baseline(train_docs: &[Document]) -> Result<BioTag> {
    let mut counts = [0usize; 3];
    for doc in train_docs {
        for tag in doc.tags().ok_or_else(|| Error::invalid(format!("document `{}` has no BIO tags", doc.doc_id)))? {
            counts[tag.index()] += 1;
        }
    }
    if counts.iter().sum::<usize>() == 0 {
        return Err(Error::invalid("majority baseline needs tagged training sentences"));
    }
    let mut best = 0;
    for c in 1..3 {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    Ok(BioTag::from_index(best).expect("three classes"))
}
