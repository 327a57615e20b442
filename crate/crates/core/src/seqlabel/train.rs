use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{build_sequences, FocalLoss, ModelKind, Sequence, Tagger};
use crate::corpus::{BioTag, Document};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::vectorize::EmbeddingSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub eps: f64,
    pub focal: FocalLoss,
    pub hidden: usize,
    pub seed: u64,
    /// Rescale a step's gradient to at most this L2 norm.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 600,
            lr: 0.01,
            eps: 1e-8,
            focal: FocalLoss::default(),
            hidden: 200,
            seed: 0,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("eps must be positive".into()));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.focal.alpha) || self.focal.gamma < 0.0 {
            return Err(Error::Config("focal loss needs alpha in [0, 1] and gamma >= 0".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::Config("clip_norm must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Adagrad with a zero-initialized squared-gradient accumulator.
#[derive(Debug, Clone)]
pub struct Adagrad {
    pub lr: f64,
    pub eps: f64,
    pub accum: Vec<f64>,
}

impl Adagrad {
    pub fn new(n: usize, lr: f64, eps: f64) -> Self {
        Adagrad {
            lr,
            eps,
            accum: vec![0.0; n],
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        for ((p, g), a) in theta.iter_mut().zip(grad).zip(&mut self.accum) {
            *a += g * g;
            *p -= self.lr * g / (a.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the lowest validation loss.
    pub model: Tagger,
    pub best_epoch: usize,
    pub trace: Vec<EpochLoss>,
}

fn gold(seq: &Sequence) -> Result<&[BioTag]> {
    seq.tags
        .as_deref()
        .ok_or_else(|| Error::invalid(format!("document `{}` has no BIO tags", seq.doc_id)))
}

/// Mean focal loss over all sentences of `seqs`.
pub(crate) fn pooled_loss(model: &Tagger, seqs: &[Sequence], focal: &FocalLoss) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for s in seqs {
        let tags = gold(s)?;
        total += model.loss_sum(s.x.view(), tags, focal)?;
        n += tags.len();
    }
    Ok(total / n as f64)
}

pub fn train(
    kind: ModelKind,
    train_docs: &[Document],
    val_docs: &[Document],
    embeddings: &EmbeddingSet,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let train_seqs = build_sequences(train_docs, embeddings)?;
    let val_seqs = build_sequences(val_docs, embeddings)?;
    train_sequences(kind, &train_seqs, &val_seqs, cfg)
}

/// Per-document Adagrad training with best-on-validation selection.
pub fn train_sequences(kind: ModelKind, train: &[Sequence], val: &[Sequence], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if val.is_empty() {
        return Err(Error::invalid("validation set is empty"));
    }
    let dim = train[0].x.ncols();
    for s in train.iter().chain(val) {
        gold(s)?;
        if s.x.ncols() != dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{dim} features"),
                got: format!("{} in document `{}`", s.x.ncols(), s.doc_id),
            });
        }
    }

    let mut model = Tagger::init(kind, dim, cfg.hidden, &mut rng_from_seed(derive_seed(cfg.seed, "seqlabel.init")));
    let mut shuffle_rng = rng_from_seed(derive_seed(cfg.seed, "seqlabel.shuffle"));
    let mut opt = Adagrad::new(model.params().len(), cfg.lr, cfg.eps);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Tagger)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for &i in &order {
            let s = &train[i];
            let (loss, mut grad) = model.loss_and_grad(s.x.view(), gold(s)?, &cfg.focal)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite training loss at epoch {epoch}, document `{}`",
                    s.doc_id
                )));
            }
            if let Some(max) = cfg.clip_norm {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > max {
                    grad.iter_mut().for_each(|g| *g *= max / norm);
                }
            }
            opt.step(model.params_mut(), &grad);
            epoch_loss += loss;
        }
        let val_loss = pooled_loss(&model, val, &cfg.focal)?;
        if !val_loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite validation loss at epoch {epoch}")));
        }
        trace.push(EpochLoss {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
            val_loss,
        });
        if best.as_ref().map_or(true, |(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, model.clone()));
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        best_epoch,
        trace,
    })
}
