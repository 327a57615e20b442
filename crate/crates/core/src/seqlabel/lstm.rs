//! Bidirectional LSTM tagger with a linear projection to three logits.
//!
//! Parameters live in one flat vector so the optimizer, gradient checks and
//! checkpoints can treat both tagger kinds uniformly. Layout per direction:
//! `W (4h x d)`, `U (4h x h)`, `b (4h)` with gate blocks in order i, f, g, o;
//! then forward direction, backward direction, `W_out (3 x 2h)`, `b_out (3)`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use rand::Rng;

#[derive(Debug, Clone, Copy)]
struct DirLayout {
    w: usize,
    u: usize,
    b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub input_dim: usize,
    pub hidden: usize,
    pub theta: Vec<f64>,
}

struct StepCache {
    h_prev: Array1<f64>,
    c_prev: Array1<f64>,
    i: Array1<f64>,
    f: Array1<f64>,
    g: Array1<f64>,
    o: Array1<f64>,
    tanh_c: Array1<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl BiLstm {
    pub fn n_params(input_dim: usize, hidden: usize) -> usize {
        let dir = 4 * hidden * input_dim + 4 * hidden * hidden + 4 * hidden;
        2 * dir + 3 * 2 * hidden + 3
    }

    pub fn from_params(input_dim: usize, hidden: usize, theta: Vec<f64>) -> Option<BiLstm> {
        (theta.len() == Self::n_params(input_dim, hidden)).then_some(BiLstm {
            input_dim,
            hidden,
            theta,
        })
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases except
    /// the forget gate, which starts at 1.
    pub fn init<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> BiLstm {
        let mut m = BiLstm {
            input_dim,
            hidden,
            theta: vec![0.0; Self::n_params(input_dim, hidden)],
        };
        let h = hidden;
        let bw = 1.0 / (input_dim as f64).sqrt();
        let bu = 1.0 / (h as f64).sqrt();
        let bo = 1.0 / ((2 * h) as f64).sqrt();
        for dir in 0..2 {
            let l = m.dir_layout(dir);
            for v in &mut m.theta[l.w..l.u] {
                *v = rng.random_range(-bw..bw);
            }
            for v in &mut m.theta[l.u..l.b] {
                *v = rng.random_range(-bu..bu);
            }
            for v in &mut m.theta[l.b + h..l.b + 2 * h] {
                *v = 1.0;
            }
        }
        let wo = m.out_offset();
        for v in &mut m.theta[wo..wo + 6 * h] {
            *v = rng.random_range(-bo..bo);
        }
        m
    }

    fn dir_layout(&self, dir: usize) -> DirLayout {
        let (d, h) = (self.input_dim, self.hidden);
        let size = 4 * h * d + 4 * h * h + 4 * h;
        let w = dir * size;
        let u = w + 4 * h * d;
        let b = u + 4 * h * h;
        DirLayout { w, u, b }
    }

    fn out_offset(&self) -> usize {
        self.dir_layout(2).w
    }

    fn views<'a>(&self, theta: &'a [f64], dir: usize) -> (ArrayView2<'a, f64>, ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
        let (d, h) = (self.input_dim, self.hidden);
        let l = self.dir_layout(dir);
        (
            ArrayView2::from_shape((4 * h, d), &theta[l.w..l.u]).unwrap(),
            ArrayView2::from_shape((4 * h, h), &theta[l.u..l.b]).unwrap(),
            ArrayView1::from(&theta[l.b..l.b + 4 * h]),
        )
    }

    fn out_views<'a>(&self, theta: &'a [f64]) -> (ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
        let h = self.hidden;
        let o = self.out_offset();
        (
            ArrayView2::from_shape((3, 2 * h), &theta[o..o + 6 * h]).unwrap(),
            ArrayView1::from(&theta[o + 6 * h..o + 6 * h + 3]),
        )
    }

    /// Runs one direction over `x` (T x d). Returns hidden states indexed by
    /// time step and the per-step caches in processing order.
    fn run_direction(&self, x: ArrayView2<f64>, dir: usize) -> (Array2<f64>, Vec<StepCache>) {
        let t_len = x.nrows();
        let h = self.hidden;
        let (w, u, b) = self.views(&self.theta, dir);
        // Input contributions for all steps at once.
        let xw = x.dot(&w.t());
        let mut hs = Array2::zeros((t_len, h));
        let mut caches = Vec::with_capacity(t_len);
        let mut h_prev = Array1::zeros(h);
        let mut c_prev = Array1::zeros(h);
        for step in 0..t_len {
            let t = if dir == 0 { step } else { t_len - 1 - step };
            let z = &xw.row(t) + &u.dot(&h_prev) + &b;
            let i = z.slice(s![0..h]).mapv(sigmoid);
            let f = z.slice(s![h..2 * h]).mapv(sigmoid);
            let g = z.slice(s![2 * h..3 * h]).mapv(f64::tanh);
            let o = z.slice(s![3 * h..4 * h]).mapv(sigmoid);
            let c = &f * &c_prev + &i * &g;
            let tanh_c = c.mapv(f64::tanh);
            let h_t = &o * &tanh_c;
            hs.row_mut(t).assign(&h_t);
            caches.push(StepCache {
                h_prev: std::mem::replace(&mut h_prev, h_t),
                c_prev: std::mem::replace(&mut c_prev, c),
                i,
                f,
                g,
                o,
                tanh_c,
            });
        }
        (hs, caches)
    }

    /// Logits for each sentence, T x 3.
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let (hf, _) = self.run_direction(x, 0);
        let (hb, _) = self.run_direction(x, 1);
        self.project(&hf, &hb)
    }

    fn project(&self, hf: &Array2<f64>, hb: &Array2<f64>) -> Array2<f64> {
        let h = self.hidden;
        let (wo, bo) = self.out_views(&self.theta);
        hf.dot(&wo.slice(s![.., 0..h]).t()) + hb.dot(&wo.slice(s![.., h..2 * h]).t()) + &bo
    }

    /// Forward pass plus backpropagation through time.
    ///
    /// `dlogits` maps the T x 3 logits to their loss gradient; the returned
    /// vector has the layout of `theta`.
    pub fn backward(&self, x: ArrayView2<f64>, dlogits: &Array2<f64>) -> Vec<f64> {
        let h = self.hidden;
        let d = self.input_dim;
        let (hf, cf) = self.run_direction(x, 0);
        let (hb, cb) = self.run_direction(x, 1);
        let mut grad = vec![0.0; self.theta.len()];
        let (wo, _) = self.out_views(&self.theta);

        {
            let o = self.out_offset();
            let (gw, gb) = grad[o..o + 6 * h + 3].split_at_mut(6 * h);
            let mut gw = ArrayViewMut2::from_shape((3, 2 * h), gw).unwrap();
            gw.slice_mut(s![.., 0..h]).assign(&dlogits.t().dot(&hf));
            gw.slice_mut(s![.., h..2 * h]).assign(&dlogits.t().dot(&hb));
            ArrayViewMut1::from(gb).assign(&dlogits.sum_axis(ndarray::Axis(0)));
        }
        let dhf = dlogits.dot(&wo.slice(s![.., 0..h]));
        let dhb = dlogits.dot(&wo.slice(s![.., h..2 * h]));

        for (dir, caches, dh_out) in [(0, cf, dhf), (1, cb, dhb)] {
            let t_len = x.nrows();
            let (_, u, _) = self.views(&self.theta, dir);
            let mut dz_all = Array2::zeros((t_len, 4 * h));
            let mut h_prevs = Array2::zeros((t_len, h));
            let mut dh_next: Array1<f64> = Array1::zeros(h);
            let mut dc_next: Array1<f64> = Array1::zeros(h);
            for step in (0..t_len).rev() {
                let t = if dir == 0 { step } else { t_len - 1 - step };
                let c = &caches[step];
                let dh = &dh_out.row(t) + &dh_next;
                let d_o = &dh * &c.tanh_c;
                let dc = &dh * &c.o * &c.tanh_c.mapv(|v| 1.0 - v * v) + &dc_next;
                let di = &dc * &c.g;
                let dg = &dc * &c.i;
                let df = &dc * &c.c_prev;
                dc_next = &dc * &c.f;
                let mut dz = dz_all.row_mut(t);
                dz.slice_mut(s![0..h]).assign(&(&di * &c.i.mapv(|v| v * (1.0 - v))));
                dz.slice_mut(s![h..2 * h]).assign(&(&df * &c.f.mapv(|v| v * (1.0 - v))));
                dz.slice_mut(s![2 * h..3 * h]).assign(&(&dg * &c.g.mapv(|v| 1.0 - v * v)));
                dz.slice_mut(s![3 * h..4 * h]).assign(&(&d_o * &c.o.mapv(|v| v * (1.0 - v))));
                dh_next = u.t().dot(&dz_all.row(t));
                h_prevs.row_mut(t).assign(&c.h_prev);
            }
            let l = self.dir_layout(dir);
            let gw = dz_all.t().dot(&x);
            let gu = dz_all.t().dot(&h_prevs);
            let gb = dz_all.sum_axis(ndarray::Axis(0));
            grad[l.w..l.u].copy_from_slice(gw.as_slice().unwrap());
            grad[l.u..l.b].copy_from_slice(gu.as_slice().unwrap());
            grad[l.b..l.b + 4 * h].copy_from_slice(gb.as_slice().unwrap());
            debug_assert_eq!(gw.dim(), (4 * h, d));
        }
        grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn param_count() {
        assert_eq!(BiLstm::n_params(3, 2), 2 * (24 + 16 + 8) + 12 + 3);
        let m = BiLstm::init(3, 2, &mut rng_from_seed(0));
        assert_eq!(m.theta.len(), BiLstm::n_params(3, 2));
    }

    #[test]
    fn forget_bias_is_one() {
        let m = BiLstm::init(3, 2, &mut rng_from_seed(0));
        let (_, _, b) = m.views(&m.theta, 1);
        assert_eq!(b.to_vec(), vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn output_depends_on_both_neighbors() {
        let m = BiLstm::init(2, 3, &mut rng_from_seed(5));
        let x = ndarray::array![[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]];
        let base = m.forward(x.view());
        let mut x2 = x.clone();
        x2[[2, 0]] = -1.0;
        // Changing the last input moves the first output via the backward pass.
        let moved = m.forward(x2.view());
        assert!((&base.row(0) - &moved.row(0)).iter().any(|v| v.abs() > 1e-9));
    }
}
