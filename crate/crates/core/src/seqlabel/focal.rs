//! Sigmoid focal cross-entropy over independent per-class sigmoids.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalLoss {
    pub gamma: f64,
    pub alpha: f64,
}

impl Default for FocalLoss {
    fn default() -> Self {
        FocalLoss {
            gamma: 2.0,
            alpha: 0.25,
        }
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl FocalLoss {
    /// Loss of one logit and its derivative.
    ///
    /// With `p_t` the sigmoid probability of the observed outcome and
    /// `alpha_t` the matching class weight, the loss is
    /// `alpha_t (1 - p_t)^gamma (-ln p_t)` and its logit derivative is
    /// `s alpha_t (1 - p_t)^gamma (gamma p_t ln p_t - (1 - p_t))`, with `s = +1`
    /// for a positive target and `-1` otherwise.
    pub fn term(&self, logit: f64, positive: bool) -> (f64, f64) {
        let (signed, alpha_t, s) = if positive {
            (logit, self.alpha, 1.0)
        } else {
            (-logit, 1.0 - self.alpha, -1.0)
        };
        let p_t = sigmoid(signed);
        let one_minus = sigmoid(-signed);
        let ln_p = -softplus(-signed);
        let modulator = if self.gamma == 0.0 { 1.0 } else { one_minus.powf(self.gamma) };
        let loss = -alpha_t * modulator * ln_p;
        let grad = s * alpha_t * modulator * (self.gamma * p_t * ln_p - one_minus);
        (loss, grad)
    }

    /// Summed loss over the three classes for a one-hot `target` index.
    pub fn loss_and_grad(&self, logits: &[f64; 3], target: usize) -> (f64, [f64; 3]) {
        let mut loss = 0.0;
        let mut grad = [0.0; 3];
        for c in 0..3 {
            let (l, g) = self.term(logits[c], c == target);
            loss += l;
            grad[c] = g;
        }
        (loss, grad)
    }
}
