//! Input formats: CoNLL-U treebanks, character vocabularies, language
//! embedding tables and WALS feature tables.

pub mod conllu;
pub mod embeddings;
pub mod sample;
pub mod treebank;
pub mod vocab;
pub mod wals;

pub use conllu::{parse_conllu, to_conllu, Corpus, Sentence, Split, Token};
pub use embeddings::{
    load_embeddings, load_embeddings_file, load_snapshot_dir, snapshot_file_name,
    LanguageEmbeddingTable,
};
pub use sample::{downsample, DEFAULT_SENTENCE_CAP};
pub use treebank::{Treebank, TreebankSet};
pub use vocab::{build_char_vocab, CharVocab, UNK};
pub use wals::{filter_feature, load_wals, load_wals_file, FilteredFeature, WalsFeatureTable};
