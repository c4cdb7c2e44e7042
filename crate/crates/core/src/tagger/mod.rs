//! Character-level bi-LSTM tagger with a trainable language embedding
//! concatenated to every word representation.

pub mod config;
pub mod model;
pub mod train;

pub use config::TaggerConfig;
pub use model::{accuracy, argmax, RowInit, TaggerModel};
pub use train::{train, train_with, EarlyStopping, EpochRecord, StopDecision, TrainLog};
