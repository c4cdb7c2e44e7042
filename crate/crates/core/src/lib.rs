//! Multilingual character-level PoS tagging with trainable language
//! embeddings, cross-lingual transfer grids, and a linear probe that predicts
//! WALS typological features from language embeddings snapshotted during
//! fine-tuning.

pub mod data;
pub mod error;
pub mod nn;
pub mod probe;
pub mod report;
pub mod synthetic;
pub mod tagger;
pub mod transfer;

pub use error::{Error, ErrorKind, Result};
