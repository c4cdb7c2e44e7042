use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::conllu::Corpus;

/// Training-set cap used for every treebank.
pub const DEFAULT_SENTENCE_CAP: usize = 1500;

/// Uniform sample of `cap` sentences without replacement, keeping the
/// original order. Corpora at or under the cap are returned as is.
pub fn downsample(corpus: &Corpus, cap: usize, seed: u64) -> Corpus {
    assert!(cap >= 1, "downsample cap must be positive");
    if corpus.len() <= cap {
        return corpus.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = rand::seq::index::sample(&mut rng, corpus.len(), cap).into_vec();
    keep.sort_unstable();
    Corpus {
        language: corpus.language.clone(),
        split: corpus.split,
        sentences: keep.into_iter().map(|i| corpus.sentences[i].clone()).collect(),
    }
}
