//! Grammar induction and grammar-constrained decoding of frame-wise activity
//! probabilities.
//!
//! The crate is organized as a pipeline:
//!
//! * [`corpus`] turns frame annotations into label sentences wrapped in `SIL`.
//! * [`induction`] distills an And-Or grammar ([`grammar::Pcfg`]) from a corpus.
//! * [`decoder`] parses a per-frame class probability matrix against a grammar
//!   with a generalized Earley search and returns the best grammatical labeling.
//! * [`metrics`] scores frame labelings; [`synth`] generates synthetic episodes
//!   and benchmarks argmax decoding against grammar refinement.

pub mod corpus;
pub mod decoder;
mod error;
pub mod grammar;
pub mod induction;
mod logspace;
pub mod metrics;
mod sentence;
pub mod synth;

pub use error::{Error, Result};
pub use sentence::Sentence;

/// Name of the reserved silence terminal that delimits every corpus sentence.
pub const SIL: &str = "SIL";
