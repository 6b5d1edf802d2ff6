//! Zero-shot two-stage retrieval toolkit.
//!
//! The pieces, in pipeline order:
//!
//! * [`corpus`]: ingest article metadata and drop articles published before a cutoff date.
//! * [`index`]: tokenize, build per-field inverted indexes and rank with BM25.
//! * [`pipeline`]: re-rank first-stage results with an external scorer and fuse runs with RRF.
//! * [`eval`]: trec_eval-compatible metrics, judged-only evaluation and paired t-tests.
//! * [`lexfilter`]: keep only training queries that mention a medical lexicon term.
//! * [`training`]: training-pair sampling, the pairwise loss and early stopping for the scorer.
//! * [`trecio`]: topics, qrels and run files.

pub mod corpus;
mod error;
pub mod eval;
pub mod index;
pub mod lexfilter;
pub mod pipeline;
pub mod training;
pub mod trecio;

pub use error::{Error, Result, ScorerError};
