//! Argument search building blocks.
//!
//! The crate covers the three stages of an argument retrieval framework:
//!
//! 1. grouping documents into topics ([`cluster`], [`dimred`], [`vectorize`]),
//! 2. segmenting documents into multi-sentence arguments with a BIO
//!    sentence tagger ([`seqlabel`]),
//! 3. grouping each topic's arguments by aspect ([`argclust`]).
//!
//! [`metrics`] holds every evaluation measure used to score those stages and
//! [`pipeline`] wires the stages together behind the `argmine` binary.

pub mod argclust;
pub mod cluster;
pub mod corpus;
pub mod dimred;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod seqlabel;
pub mod vectorize;

pub use error::{Error, Result};
