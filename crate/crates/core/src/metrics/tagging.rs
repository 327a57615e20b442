use serde::{Deserialize, Serialize};

use crate::corpus::BioTag;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Sentence-pooled BIO tagging scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggingEval {
    /// Indexed B, I, O.
    pub per_class: [ClassScores; 3],
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub f1_macro_bi: f64,
    /// `confusion[true][pred]`.
    pub confusion: [[usize; 3]; 3],
}

impl TaggingEval {
    pub fn class(&self, tag: BioTag) -> &ClassScores {
        &self.per_class[tag.index()]
    }

    pub fn from_confusion(confusion: [[usize; 3]; 3]) -> TaggingEval {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let mut per_class = [ClassScores {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            support: 0,
        }; 3];
        for c in 0..3 {
            let tp = confusion[c][c];
            let predicted: usize = (0..3).map(|t| confusion[t][c]).sum();
            let support: usize = confusion[c].iter().sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            per_class[c] = ClassScores {
                precision,
                recall,
                f1,
                support,
            };
        }
        let total: usize = per_class.iter().map(|c| c.support).sum();
        let f1_macro = per_class.iter().map(|c| c.f1).sum::<f64>() / 3.0;
        let f1_weighted = if total == 0 {
            0.0
        } else {
            per_class.iter().map(|c| c.f1 * c.support as f64).sum::<f64>() / total as f64
        };
        let f1_macro_bi = (per_class[0].f1 + per_class[1].f1) / 2.0;
        TaggingEval {
            per_class,
            f1_macro,
            f1_weighted,
            f1_macro_bi,
            confusion,
        }
    }
}

/// Scores aligned gold/predicted tag sequences pooled over all sentences.
pub fn tagging_eval(truth: &[Vec<BioTag>], pred: &[Vec<BioTag>]) -> Result<TaggingEval> {
    if truth.len() != pred.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} sequences", truth.len()),
            got: format!("{} sequences", pred.len()),
        });
    }
    let mut confusion = [[0usize; 3]; 3];
    for (i, (t, p)) in truth.iter().zip(pred).enumerate() {
        if t.len() != p.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} tags in sequence {i}", t.len()),
                got: format!("{} tags", p.len()),
            });
        }
        for (a, b) in t.iter().zip(p) {
            confusion[a.index()][b.index()] += 1;
        }
    }
    Ok(TaggingEval::from_confusion(confusion))
}
