//! Latent semantic analysis: truncated SVD of a document-term matrix.
//!
//! Small problems (the short side at most [`DENSE_LIMIT`]) go through a
//! one-sided Jacobi SVD. Larger ones use block subspace iteration with
//! re-orthonormalization and a Rayleigh-Ritz step solved by the same Jacobi
//! routine, iterated until every kept pair has a residual below
//! [`RESIDUAL_TOL`] relative to the top singular value.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const DENSE_LIMIT: usize = 200;
pub const RESIDUAL_TOL: f64 = 1e-8;
const MAX_SUBSPACE_ITERS: usize = 1000;
const OVERSAMPLE: usize = 10;
const SUBSPACE_SEED: u64 = 0x05ee_d15a;
const MAGIC: &[u8; 4] = b"LSA1";

#[derive(Debug, Clone, PartialEq)]
pub struct LsaModel {
    /// k x V, orthonormal rows.
    pub components: Array2<f64>,
    /// Non-increasing.
    pub singular_values: Array1<f64>,
}

impl LsaModel {
    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.components.ncols()
    }

    /// Projects rows of `x` onto the components: `x · componentsᵀ`.
    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        lsa_transform(self, x)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::with_capacity(20 + 8 * (self.k() * (self.n_features() + 1)));
        self.write_to(&mut buf).expect("Vec write");
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LsaModel> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        LsaModel::read_from(&mut bytes.as_slice()).map_err(|m| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: m,
        })
    }

    /// `LSA1`, k (u64), V (u64), k singular values, k x V components; all little-endian.
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.k() as u64).to_le_bytes())?;
        w.write_all(&(self.n_features() as u64).to_le_bytes())?;
        for v in &self.singular_values {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in self.components.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> std::result::Result<LsaModel, String> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| e.to_string())?;
        if &magic != MAGIC {
            return Err(format!("bad magic {magic:?}"));
        }
        let k = read_u64(r)? as usize;
        let v = read_u64(r)? as usize;
        let sv = (0..k).map(|_| read_f64(r)).collect::<std::result::Result<Vec<_>, _>>()?;
        let comp = (0..k * v).map(|_| read_f64(r)).collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(LsaModel {
            components: Array2::from_shape_vec((k, v), comp).map_err(|e| e.to_string())?,
            singular_values: Array1::from(sv),
        })
    }
}

fn read_u64<R: Read>(r: &mut R) -> std::result::Result<u64, String> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| e.to_string())?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> std::result::Result<f64, String> {
    read_u64(r).map(f64::from_bits)
}

pub fn lsa_fit(x: &Array2<f64>, k: usize) -> Result<LsaModel> {
    let (n, v) = x.dim();
    if k == 0 || k > n.min(v) {
        return Err(Error::invalid(format!(
            "LSA rank {k} outside 1..={} for a {n}x{v} matrix",
            n.min(v)
        )));
    }
    if x.iter().any(|a| !a.is_finite()) {
        return Err(Error::Numeric("LSA input has non-finite entries".into()));
    }
    let (mut sv, mut comps) = if n.min(v) <= DENSE_LIMIT {
        let svd = jacobi_svd(x.view());
        (
            svd.s.slice(s![..k]).to_owned(),
            svd.v.slice(s![.., ..k]).t().to_owned(),
        )
    } else {
        subspace_svd(x, k)?
    };
    comps = comps.as_standard_layout().into_owned();
    for (i, mut row) in comps.rows_mut().into_iter().enumerate() {
        canonicalize_sign(row.as_slice_mut().expect("row-major"));
        if sv[i] < 0.0 {
            sv[i] = 0.0;
        }
    }
    Ok(LsaModel {
        components: comps,
        singular_values: sv,
    })
}

pub fn lsa_transform(model: &LsaModel, x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != model.n_features() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} columns", model.n_features()),
            got: format!("{} columns", x.ncols()),
        });
    }
    Ok(x.dot(&model.components.t()))
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn canonicalize_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, a) in v.iter().enumerate() {
        if a.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&a| a < 0.0) {
        v.iter_mut().for_each(|a| *a = -*a);
    }
}

/// Thin SVD `a = u · diag(s) · vᵀ`, singular values descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub v: Array2<f64>,
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Orthogonalizes the columns of the taller orientation by plane rotations.
/// `r = min(m, n)` singular triplets are returned; left or right vectors
/// belonging to zero singular values are completed to an orthonormal set.
pub fn jacobi_svd(a: ArrayView2<'_, f64>) -> Svd {
    let (m, n) = a.dim();
    if m >= n {
        // Rows of `w` are the columns of `a`.
        let (w, vmat) = hestenes(a.t().to_owned());
        finish(w, vmat, false)
    } else {
        let (w, vmat) = hestenes(a.to_owned());
        finish(w, vmat, true)
    }
}

/// Rotates the rows of `w` until they are mutually orthogonal.
/// Returns the rotated rows and the accumulated rotation (also row-wise).
fn hestenes(mut w: Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let r = w.nrows();
    let mut v = Array2::<f64>::eye(r);
    let eps = f64::EPSILON;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..r {
            for q in p + 1..r {
                let (alpha, beta, gamma) = {
                    let rp = w.row(p);
                    let rq = w.row(q);
                    (rp.dot(&rp), rq.dot(&rq), rp.dot(&rq))
                };
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                rotate_rows(&mut w, p, q, c, sn);
                rotate_rows(&mut v, p, q, c, sn);
            }
        }
        if !rotated {
            break;
        }
    }
    (w, v)
}

fn rotate_rows(m: &mut Array2<f64>, p: usize, q: usize, c: f64, s: f64) {
    let (mut rp, mut rq) = m.multi_slice_mut((s![p, ..], s![q, ..]));
    for (a, b) in rp.iter_mut().zip(rq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// `w` rows are the orthogonalized vectors `a·v_j` (or `aᵀ·v_j` when
/// transposed); `vmat` rows are the rotations `v_j`.
fn finish(w: Array2<f64>, vmat: Array2<f64>, transposed: bool) -> Svd {
    let r = w.nrows();
    let norms: Vec<f64> = w.rows().into_iter().map(|c| c.dot(&c).sqrt()).collect();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let s = Array1::from_iter(order.iter().map(|&i| norms[i]));
    let scale = s.first().copied().unwrap_or(0.0);
    let tiny = scale * w.ncols().max(r) as f64 * f64::EPSILON;
    let mut left = Array2::<f64>::zeros((w.ncols(), r));
    let mut valid = vec![false; r];
    for (dst, &src) in order.iter().enumerate() {
        if norms[src] > tiny && norms[src] > 0.0 {
            left.column_mut(dst).assign(&(&w.row(src) / norms[src]));
            valid[dst] = true;
        }
    }
    complete_orthonormal(&mut left, &valid);
    let right = vmat.select(Axis(0), &order).reversed_axes();
    if transposed {
        Svd { u: right, s, v: left }
    } else {
        Svd { u: left, s, v: right }
    }
}

/// Fills columns flagged invalid with unit vectors orthogonal to the rest.
fn complete_orthonormal(m: &mut Array2<f64>, valid: &[bool]) {
    let rows = m.nrows();
    let mut basis = 0usize;
    for col in 0..m.ncols() {
        if valid[col] {
            continue;
        }
        loop {
            if basis >= rows {
                return;
            }
            let mut cand = Array1::<f64>::zeros(rows);
            cand[basis] = 1.0;
            basis += 1;
            for _ in 0..2 {
                for other in 0..m.ncols() {
                    if other == col {
                        continue;
                    }
                    let o = m.column(other);
                    let d = o.dot(&cand);
                    cand.scaled_add(-d, &o);
                }
            }
            let nrm = cand.dot(&cand).sqrt();
            if nrm > 1e-8 {
                m.column_mut(col).assign(&(cand / nrm));
                break;
            }
        }
    }
}

/// Orthonormalizes the columns of `q` in place (modified Gram-Schmidt, two passes).
fn orthonormalize(q: &mut Array2<f64>) {
    let cols = q.ncols();
    let mut valid = vec![true; cols];
    for j in 0..cols {
        for _ in 0..2 {
            for i in 0..j {
                if !valid[i] {
                    continue;
                }
                let d = q.column(i).dot(&q.column(j));
                let qi = q.column(i).to_owned();
                q.column_mut(j).scaled_add(-d, &qi);
            }
        }
        let nrm = q.column(j).dot(&q.column(j)).sqrt();
        if nrm > 1e-300 {
            q.column_mut(j).mapv_inplace(|a| a / nrm);
        } else {
            valid[j] = false;
        }
    }
    if valid.iter().any(|v| !v) {
        complete_orthonormal(q, &valid);
    }
}

fn subspace_svd(x: &Array2<f64>, k: usize) -> Result<(Array1<f64>, Array2<f64>)> {
    let (n, v) = x.dim();
    let p = (k + OVERSAMPLE).min(n.min(v));
    let mut rng = rng_from_seed(SUBSPACE_SEED);
    let mut q = Array2::from_shape_fn((v, p), |_| standard_normal(&mut rng));
    orthonormalize(&mut q);
    let xt = x.t();
    for iter in 0..MAX_SUBSPACE_ITERS {
        let mut y = x.dot(&q);
        orthonormalize(&mut y);
        q = xt.dot(&y);
        orthonormalize(&mut q);
        if iter % 4 != 3 {
            continue;
        }
        // Rayleigh-Ritz: x·q = ub · s · wbᵀ, so x (q wb_i) = s_i ub_i exactly.
        let b = x.dot(&q);
        let svd = jacobi_svd(b.view());
        let vecs = q.dot(&svd.v);
        let top = svd.s[0].max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..k {
            let resid = &xt.dot(&svd.u.column(i)) - &(&vecs.column(i) * svd.s[i]);
            worst = worst.max(resid.dot(&resid).sqrt() / top);
        }
        if worst <= RESIDUAL_TOL || svd.s[0] == 0.0 {
            return Ok((
                svd.s.slice(s![..k]).to_owned(),
                vecs.slice(s![.., ..k]).t().to_owned(),
            ));
        }
        q = vecs;
    }
    Err(Error::Numeric(format!(
        "LSA subspace iteration did not reach residual {RESIDUAL_TOL} in {MAX_SUBSPACE_ITERS} iterations"
    )))
}

/// Box-Muller standard normal draw.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
