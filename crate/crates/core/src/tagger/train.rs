use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Corpus, LanguageEmbeddingTable};
use crate::error::{Error, Result};
use crate::nn::AdamState;
use crate::tagger::model::TaggerModel;

/// Patience-based early stopping on a score that should increase.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::NEG_INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, score: f64) -> StopDecision {
        if score > self.best {
            self.best = score;
            self.best_epoch = epoch;
            self.stale = 0;
            StopDecision::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_accuracy: BTreeMap<String, f64>,
    /// unweighted mean over dev languages
    pub macro_dev: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// `snapshots[e]` is the language table after `e` epochs.
    pub snapshots: Vec<LanguageEmbeddingTable>,
    pub best_epoch: usize,
}

/// Trains `model` with one Adam update per sentence over shuffled epochs of
/// all training corpora. Returns the checkpoint with the best macro dev
/// accuracy together with the full log. An empty `dev` list falls back to
/// scoring on the training corpora.
pub fn train(model: TaggerModel, train: &[Corpus], dev: &[Corpus]) -> Result<(TaggerModel, TrainLog)> {
    train_with(model, train, dev, |_, _| {})
}

/// [`train`] with a callback invoked after every epoch.
pub fn train_with(
    mut model: TaggerModel,
    train: &[Corpus],
    dev: &[Corpus],
    mut on_epoch: impl FnMut(&TaggerModel, &EpochRecord),
) -> Result<(TaggerModel, TrainLog)> {
    let cfg = model.config.clone();
    cfg.validate()?;
    if train.iter().all(Corpus::is_empty) {
        return Err(Error::EmptyCorpus("training set is empty".into()));
    }
    if cfg.use_lang_emb {
        for c in train {
            if model.language_index(&c.language).is_none() {
                return Err(Error::UnknownLanguage(c.language.clone()));
            }
        }
    }
    let dev = if dev.is_empty() { train } else { dev };

    let mut order: Vec<(usize, usize)> = train
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| (0..c.len()).map(move |si| (ci, si)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut adam = AdamState::new(cfg.adam, model.store());
    let mut stopper = EarlyStopping::new(cfg.early_stop_patience);
    let mut best = model.clone();
    let mut log = TrainLog {
        epochs: Vec::new(),
        snapshots: vec![model.language_table(0)],
        best_epoch: 0,
    };

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        for &(ci, si) in &order {
            let corpus = &train[ci];
            total_loss += model.loss_and_gradients(&corpus.sentences[si], &corpus.language)?;
            adam.step(model.store_mut())?;
        }
        model.store_mut().clear_grad();

        let mut dev_accuracy = BTreeMap::new();
        for c in dev {
            dev_accuracy.insert(c.language.clone(), model.evaluate(c)?);
        }
        let macro_dev = dev_accuracy.values().sum::<f64>() / dev_accuracy.len() as f64;
        let record = EpochRecord {
            epoch,
            train_loss: total_loss,
            dev_accuracy,
            macro_dev,
        };
        log::debug!("epoch {epoch}: loss {total_loss:.4} dev {macro_dev:.4}");
        on_epoch(&model, &record);
        log.snapshots.push(model.language_table(epoch));
        log.epochs.push(record);

        match stopper.observe(epoch, macro_dev) {
            StopDecision::Improved => best = model.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    log.best_epoch = stopper.best_epoch();
    Ok((best, log))
}
