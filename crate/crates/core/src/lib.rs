//! Staged retrieval filters and judgment-free evaluation.
//!
//! The crate covers the full pipeline used to study candidate-generation
//! filters: corpus ingestion ([`corpus`]), inverted index construction
//! ([`index`]), the filters themselves ([`filters`]), classical effectiveness
//! metrics ([`metrics`]), ranking-similarity measures including maximized
//! effectiveness difference ([`similarity`]), and the evaluation harness that
//! ties filter output back to a gold ranking ([`harness`]).

pub mod corpus;
pub mod filters;
pub mod harness;
pub mod index;
pub mod metrics;
pub mod similarity;
pub mod synth;

#[cfg(test)]
pub(crate) mod testutil;
