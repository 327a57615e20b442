//! Per-sentence feed-forward tagger: `d -> hidden (ReLU) -> 3`.
//!
//! Flat layout: `W1 (hidden x d)`, `b1 (hidden)`, `W2 (3 x hidden)`, `b2 (3)`.

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Fnn {
    pub input_dim: usize,
    pub hidden: usize,
    pub theta: Vec<f64>,
}

impl Fnn {
    pub fn n_params(input_dim: usize, hidden: usize) -> usize {
        hidden * input_dim + hidden + 3 * hidden + 3
    }

    pub fn from_params(input_dim: usize, hidden: usize, theta: Vec<f64>) -> Option<Fnn> {
        (theta.len() == Self::n_params(input_dim, hidden)).then_some(Fnn {
            input_dim,
            hidden,
            theta,
        })
    }

    pub fn init<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> Fnn {
        let mut m = Fnn {
            input_dim,
            hidden,
            theta: vec![0.0; Self::n_params(input_dim, hidden)],
        };
        let (w1, _, w2, b2) = m.offsets();
        let a = 1.0 / (input_dim as f64).sqrt();
        for v in &mut m.theta[w1..w1 + hidden * input_dim] {
            *v = rng.random_range(-a..a);
        }
        let a = 1.0 / (hidden as f64).sqrt();
        for v in &mut m.theta[w2..b2] {
            *v = rng.random_range(-a..a);
        }
        m
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        let b1 = self.hidden * self.input_dim;
        let w2 = b1 + self.hidden;
        let b2 = w2 + 3 * self.hidden;
        (0, b1, w2, b2)
    }

    fn views(&self) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>, ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let (_, b1, w2, b2) = self.offsets();
        let (d, h) = (self.input_dim, self.hidden);
        (
            ArrayView2::from_shape((h, d), &self.theta[..b1]).unwrap(),
            ArrayView1::from(&self.theta[b1..w2]),
            ArrayView2::from_shape((3, h), &self.theta[w2..b2]).unwrap(),
            ArrayView1::from(&self.theta[b2..]),
        )
    }

    fn hidden_pre(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let (w1, b1, _, _) = self.views();
        x.dot(&w1.t()) + &b1
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let (_, _, w2, b2) = self.views();
        let a = self.hidden_pre(x).mapv(|v| v.max(0.0));
        a.dot(&w2.t()) + &b2
    }

    pub fn backward(&self, x: ArrayView2<f64>, dlogits: &Array2<f64>) -> Vec<f64> {
        let (_, _, w2, _) = self.views();
        let pre = self.hidden_pre(x);
        let act = pre.mapv(|v| v.max(0.0));
        let mut dpre = dlogits.dot(&w2);
        dpre.zip_mut_with(&pre, |g, &p| {
            if p <= 0.0 {
                *g = 0.0
            }
        });
        let mut grad = vec![0.0; self.theta.len()];
        let (_, b1, w2o, b2) = self.offsets();
        let (d, h) = (self.input_dim, self.hidden);
        ArrayViewMut2::from_shape((h, d), &mut grad[..b1])
            .unwrap()
            .assign(&dpre.t().dot(&x));
        ArrayViewMut1::from(&mut grad[b1..w2o]).assign(&dpre.sum_axis(Axis(0)));
        ArrayViewMut2::from_shape((3, h), &mut grad[w2o..b2])
            .unwrap()
            .assign(&dlogits.t().dot(&act));
        ArrayViewMut1::from(&mut grad[b2..]).assign(&dlogits.sum_axis(Axis(0)));
        grad
    }
}
