//! Multi-domain fake news classification, built from first principles.
//!
//! The crate implements two binary classifiers over (news topic, news body)
//! pairs:
//!
//! * **Model 1** — subword-composed word embeddings, a bidirectional GRU
//!   encoder per field, word-level attention pooling, and a five-layer MLP
//!   over the concatenated sentence vectors.
//! * **Model 2** — precomputed contextual vectors per field (ingested from a
//!   file, or produced by a fallback mean-of-embeddings provider), merged and
//!   fed to the same MLP.
//!
//! Everything numeric runs on the small reverse-mode autodiff engine in
//! [`numerics`]; there is no external ML dependency. The [`corpus`] module
//! ingests the FakeNews AMT / Celebrity style datasets, and [`experiments`]
//! runs the four evaluation protocols (multi-domain, cross-domain,
//! leave-one-domain-out, per-domain) with deterministic, seedable reports.

pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod encoder;
pub mod error;
pub mod experiments;
pub mod models;
pub mod numerics;

pub use error::{Error, Result};
