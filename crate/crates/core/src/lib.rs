//! Zero-shot node classification by tabular label inpainting.
//!
//! A graph is turned into a table with one row per node: raw and
//! neighborhood-smoothed features, random-walk return probabilities,
//! Laplacian eigenvectors and optional precomputed embeddings. Predictions
//! come from a pool of closed-form ridge classifiers (one per encoding) and
//! size-constrained tabular learners run on subsampled tables, combined by
//! greedy ensemble selection on held-out predictions.

pub mod graph;
pub mod seeding;
pub mod encoders;
pub(crate) mod linalg;
pub mod folds;
pub mod linear;
pub mod predictor;
pub mod tabular;
pub mod ensemble;
pub mod pipeline;
pub mod oracle;
pub mod selftest;
