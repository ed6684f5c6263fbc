//! Cross-lingual sentence embedding pipeline.
//!
//! Fine-tunes a sentence encoder on mixed monolingual NLI triplets
//! (Multiple Negatives Ranking Loss) followed by STS regression
//! (cosine similarity loss), then evaluates monolingual and
//! cross-lingual similarity quality plus KNN classification.

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod objectives;
pub mod report;
pub mod rng;
pub mod synthbench;
pub mod trainer;

pub use error::CoreError;
