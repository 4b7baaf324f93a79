//! Non-monotonic sequence generation.
//!
//! Sentences are generated as binary trees: a word is placed, then its left
//! and right subtrees are generated recursively, and the in-order traversal
//! (without `<end>` leaves) is the output. Policies are LSTMs trained to
//! imitate oracles that know the target sentence.

pub mod checkpoint;
pub mod cli;
pub mod decoder;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod oracle;
pub mod policy;
pub mod seed;
pub mod trainer;
pub mod tree;
pub mod vocab;

pub use error::{Error, Result};
