//! Dimensionality reduction applied before clustering.

pub mod lsa;
pub mod umap;

pub use lsa::{jacobi_svd, lsa_fit, lsa_transform, LsaModel, Svd};
pub use umap::{umap_fit_transform, FuzzyGraph, UmapConfig};
