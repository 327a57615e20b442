mod common;

use approx::assert_abs_diff_eq;
use argmine::dimred::lsa::DENSE_LIMIT;
use argmine::dimred::umap::fuzzy_simplicial_set;
use argmine::dimred::{lsa_fit, umap_fit_transform, UmapConfig};
use argmine::rng::rng_from_seed;
use nalgebra::DMatrix;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

fn random_matrix(n: usize, v: usize, seed: u64) -> Array2<f64> {
    let mut rng = rng_from_seed(seed);
    Array2::from_shape_fn((n, v), |_| rng.random::<f64>() * 2.0 - 1.0)
}

fn to_nalgebra(x: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[[i, j]])
}

fn oracle_singular_values(x: &Array2<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = to_nalgebra(x).singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `‖x − x·Cᵀ·C‖_F`: the error of projecting onto the component rows.
fn reconstruction_error(x: &Array2<f64>, comps: &Array2<f64>) -> f64 {
    let r = x - &x.dot(&comps.t()).dot(comps);
    r.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn max_orthonormality_defect(comps: &Array2<f64>) -> f64 {
    let g = comps.dot(&comps.t());
    let k = g.nrows();
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[[i, j]] - target).abs());
        }
    }
    worst
}

#[test]
fn lsa_error_matches_trailing_singular_values() {
    let x = random_matrix(8, 5, 3);
    let s = oracle_singular_values(&x);
    let model = lsa_fit(&x, 2).unwrap();
    let expected = s[2..].iter().map(|a| a * a).sum::<f64>().sqrt();
    assert_abs_diff_eq!(reconstruction_error(&x, &model.components), expected, epsilon = 1e-6);
    for (got, want) in model.singular_values.iter().zip(&s) {
        assert_abs_diff_eq!(*got, *want, epsilon = 1e-9);
    }
}

#[test]
fn transform_of_training_matrix_is_u_sigma() {
    let x = random_matrix(9, 6, 11);
    let model = lsa_fit(&x, 3).unwrap();
    let z = model.transform(&x).unwrap();
    // Columns of x·Vᵀ are σ_i · u_i: orthogonal with norms σ_i.
    let g = z.t().dot(&z);
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { model.singular_values[i].powi(2) } else { 0.0 };
            assert_abs_diff_eq!(g[[i, j]], want, epsilon = 1e-6);
        }
    }
}

#[test]
fn subspace_iteration_agrees_with_dense_oracle() {
    // Low-rank signal plus noise, large enough to skip the dense solver.
    let (n, v, rank) = (DENSE_LIMIT + 30, DENSE_LIMIT + 10, 6);
    let a = random_matrix(n, rank, 1);
    let b = random_matrix(rank, v, 2);
    let x = a.dot(&b) + random_matrix(n, v, 3) * 0.01;
    let s = oracle_singular_values(&x);
    let model = lsa_fit(&x, 4).unwrap();
    for (got, want) in model.singular_values.iter().zip(&s) {
        assert!((got - want).abs() <= 1e-8 * s[0], "{got} vs {want}");
    }
    assert!(max_orthonormality_defect(&model.components) < 1e-8);
    let expected = s[4..].iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!((reconstruction_error(&x, &model.components) - expected).abs() <= 1e-6 * expected.max(1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn components_orthonormal_and_error_monotone(n in 2usize..12, v in 2usize..12, seed in any::<u64>()) {
        let x = random_matrix(n, v, seed);
        let mut last = f64::INFINITY;
        for k in 1..=n.min(v) {
            let model = lsa_fit(&x, k).unwrap();
            prop_assert!(max_orthonormality_defect(&model.components) < 1e-8);
            let err = reconstruction_error(&x, &model.components);
            prop_assert!(err <= last + 1e-9);
            last = err;
        }
    }
}

fn two_blobs(seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut far = vec![0.0; 4];
    far[0] = 10.0;
    common::blobs(&[vec![0.0; 4], far], 20, 1.0, seed)
}

fn umap_2d(seed: u64) -> UmapConfig {
    UmapConfig {
        n_components: 2,
        seed,
        ..UmapConfig::default()
    }
}

fn sq_dist(x: &Array2<f64>, i: usize, j: usize) -> f64 {
    x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Indices of the other rows ordered by distance from row `i`.
fn ranked(x: &Array2<f64>, i: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..x.nrows()).filter(|&j| j != i).collect();
    others.sort_by(|&a, &b| sq_dist(x, i, a).total_cmp(&sq_dist(x, i, b)));
    others
}

/// Venna & Kaski trustworthiness from pairwise ranks.
fn trustworthiness(x: &Array2<f64>, z: &Array2<f64>, k: usize) -> f64 {
    let n = x.nrows();
    let mut penalty = 0.0;
    for i in 0..n {
        let orig = ranked(x, i);
        let near: Vec<usize> = ranked(z, i).into_iter().take(k).collect();
        for j in near {
            let rank = orig.iter().position(|&o| o == j).unwrap() + 1;
            if rank > k {
                penalty += (rank - k) as f64;
            }
        }
    }
    1.0 - 2.0 / (n as f64 * k as f64 * (2.0 * n as f64 - 3.0 * k as f64 - 1.0)) * penalty
}

#[test]
fn separated_blobs_stay_separated() {
    let (x, ids) = two_blobs(5);
    let z = umap_fit_transform(&x, &umap_2d(9)).unwrap();
    for i in 0..z.nrows() {
        assert_eq!(ids[ranked(&z, i)[0]], ids[i], "nearest neighbour of {i} crosses blobs");
    }
}

#[test]
fn trustworthiness_on_blobs() {
    let centres: Vec<Vec<f64>> = (0..3).map(|b| vec![12.0 * b as f64, 0.0, 6.0 * (b % 2) as f64]).collect();
    let (x, _) = common::blobs(&centres, 20, 1.0, 4);
    let z = umap_fit_transform(&x, &umap_2d(2)).unwrap();
    let t = trustworthiness(&x, &z, 5);
    assert!(t >= 0.95, "trustworthiness {t}");
}

#[test]
fn duplicates_share_coordinates() {
    let (mut x, _) = two_blobs(6);
    let src = x.row(3).to_owned();
    x.row_mut(17).assign(&src);
    let z = umap_fit_transform(&x, &umap_2d(1)).unwrap();
    for d in 0..2 {
        assert_abs_diff_eq!(z[[3, d]], z[[17, d]], epsilon = 1e-6);
    }
}

#[test]
fn layout_is_bit_identical_per_seed() {
    let (x, _) = two_blobs(7);
    let a = umap_fit_transform(&x, &umap_2d(3)).unwrap();
    let b = umap_fit_transform(&x, &umap_2d(3)).unwrap();
    assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
}

#[test]
fn membership_graph_symmetric_in_unit_interval() {
    let (x, _) = two_blobs(8);
    let g = fuzzy_simplicial_set(&x, 15);
    for i in 0..x.nrows() {
        for j in 0..x.nrows() {
            let w = g.weight(i, j);
            assert!((0.0..=1.0).contains(&w));
            assert_eq!(w, g.weight(j, i));
        }
    }
}
