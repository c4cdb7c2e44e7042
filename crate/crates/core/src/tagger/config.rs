use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::AdamConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerConfig {
    pub char_emb_dim: usize,
    /// per direction
    pub char_lstm_hidden: usize,
    /// per direction
    pub word_lstm_hidden: usize,
    pub word_lstm_layers: usize,
    pub lang_emb_dim: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub use_lang_emb: bool,
    pub adam: AdamConfig,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            char_emb_dim: 100,
            char_lstm_hidden: 100,
            word_lstm_hidden: 100,
            word_lstm_layers: 2,
            lang_emb_dim: 64,
            max_epochs: 10,
            early_stop_patience: 2,
            seed: 1,
            use_lang_emb: true,
            adam: AdamConfig::default(),
        }
    }
}

impl TaggerConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("char_emb_dim", self.char_emb_dim),
            ("char_lstm_hidden", self.char_lstm_hidden),
            ("word_lstm_hidden", self.word_lstm_hidden),
            ("word_lstm_layers", self.word_lstm_layers),
            ("lang_emb_dim", self.lang_emb_dim),
            ("max_epochs", self.max_epochs),
            ("early_stop_patience", self.early_stop_patience),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.adam.lr > 0.0 && self.adam.lr.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }

    /// Dimension of the vector fed to the first word-level layer.
    pub fn word_repr_dim(&self) -> usize {
        2 * self.char_lstm_hidden + if self.use_lang_emb { self.lang_emb_dim } else { 0 }
    }
}
