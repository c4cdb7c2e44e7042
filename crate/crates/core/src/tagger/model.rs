//! Character bi-LSTM word encoder, language embedding concatenation, stacked
//! word-level bi-LSTM and a linear tag classifier.

use std::collections::BTreeSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{CharVocab, Corpus, LanguageEmbeddingTable, Sentence};
use crate::error::{Error, Result};
use crate::nn::init::{uniform_xavier, zeros};
use crate::nn::lstm::{bilstm_final, bilstm_layer, LstmNodes, LstmParams};
use crate::nn::{Graph, NodeId, ParamId, ParamStore, Tensor};
use crate::tagger::config::TaggerConfig;

const CHECKPOINT_FORMAT: &str = "langvec-tagger";
const CHECKPOINT_VERSION: u32 = 1;

/// Standard deviation of randomly initialized language rows.
pub const RANDOM_ROW_STD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layout {
    char_emb: ParamId,
    char_fwd: LstmParams,
    char_bwd: LstmParams,
    word: Vec<(LstmParams, LstmParams)>,
    out_w: ParamId,
    out_b: ParamId,
    lang_emb: Option<ParamId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerModel {
    pub config: TaggerConfig,
    pub vocab: CharVocab,
    pub tags: Vec<String>,
    /// Row order of the language embedding matrix.
    pub languages: Vec<String>,
    store: ParamStore,
    layout: Layout,
}

/// Parameters bound into one graph.
struct Bound {
    char_emb: NodeId,
    char_fwd: LstmNodes,
    char_bwd: LstmNodes,
    word: Vec<(LstmNodes, LstmNodes)>,
    out_w: NodeId,
    out_b: NodeId,
    lang_emb: Option<NodeId>,
}

/// Outcome of [`TaggerModel::init_language_rows`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RowInit {
    pub pretrained: usize,
    pub random: usize,
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn random_row(seed: u64, code: &str, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(code));
    let normal = Normal::new(0.0, RANDOM_ROW_STD).expect("valid std");
    (0..dim).map(|_| normal.sample(&mut rng)).collect()
}

impl TaggerModel {
    /// Fresh model with seeded parameters. Language rows start random; use
    /// [`TaggerModel::init_language_rows`] to load pretrained vectors.
    pub fn new(
        config: TaggerConfig,
        vocab: CharVocab,
        tags: Vec<String>,
        languages: Vec<String>,
    ) -> Result<Self> {
        config.validate()?;
        if tags.is_empty() {
            return Err(Error::invalid("tagger", "empty tag inventory"));
        }
        let unique: BTreeSet<&String> = languages.iter().collect();
        if unique.len() != languages.len() {
            return Err(Error::invalid("tagger", "duplicate language code"));
        }
        if config.use_lang_emb && languages.is_empty() {
            return Err(Error::invalid("tagger", "language embeddings need at least one language"));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let char_emb = store.add(
            "char_emb",
            uniform_xavier(vocab.len(), config.char_emb_dim, &mut rng),
        );
        let char_fwd = LstmParams::new(&mut store, "char.fwd", config.char_emb_dim, config.char_lstm_hidden, &mut rng);
        let char_bwd = LstmParams::new(&mut store, "char.bwd", config.char_emb_dim, config.char_lstm_hidden, &mut rng);
        let mut word = Vec::with_capacity(config.word_lstm_layers);
        let mut input = config.word_repr_dim();
        for layer in 0..config.word_lstm_layers {
            let f = LstmParams::new(&mut store, &format!("word{layer}.fwd"), input, config.word_lstm_hidden, &mut rng);
            let b = LstmParams::new(&mut store, &format!("word{layer}.bwd"), input, config.word_lstm_hidden, &mut rng);
            word.push((f, b));
            input = 2 * config.word_lstm_hidden;
        }
        let out_w = store.add("out.w", uniform_xavier(tags.len(), input, &mut rng));
        let out_b = store.add("out.b", zeros(tags.len()));
        let lang_emb = config.use_lang_emb.then(|| {
            store.add(
                "lang_emb",
                Tensor::zeros(vec![languages.len(), config.lang_emb_dim]),
            )
        });

        let mut model = TaggerModel {
            config,
            vocab,
            tags,
            languages,
            store,
            layout: Layout {
                char_emb,
                char_fwd,
                char_bwd,
                word,
                out_w,
                out_b,
                lang_emb,
            },
        };
        model.init_language_rows(None, model.config.seed)?;
        Ok(model)
    }

    /// Builds vocabulary and tag inventory from the training corpora and
    /// allocates embedding rows for their languages plus `extra_languages`.
    pub fn for_corpora(
        config: TaggerConfig,
        train: &[&Corpus],
        extra_languages: &[String],
        pretrained: Option<&LanguageEmbeddingTable>,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyCorpus("no training corpora".into()));
        }
        let vocab = crate::data::build_char_vocab(train)?;
        let tags: BTreeSet<String> = train.iter().flat_map(|c| c.tokens()).map(|t| t.upos.clone()).collect();
        let mut languages: Vec<String> = train.iter().map(|c| c.language.clone()).collect();
        languages.extend(extra_languages.iter().cloned());
        let languages: Vec<String> = languages.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let seed = config.seed;
        let mut model = TaggerModel::new(config, vocab, tags.into_iter().collect(), languages)?;
        if pretrained.is_some() {
            model.init_language_rows(pretrained, seed)?;
        }
        Ok(model)
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn language_index(&self, code: &str) -> Option<usize> {
        self.languages.iter().position(|l| l == code)
    }

    pub fn tag_index(&self, tag: &str) -> Option<usize> {
        self.tags.iter().position(|t| t == tag)
    }

    /// Copies pretrained vectors for languages found in `pretrained`; every
    /// other row gets a seeded normal draw that depends only on `seed` and
    /// the language code.
    pub fn init_language_rows(
        &mut self,
        pretrained: Option<&LanguageEmbeddingTable>,
        seed: u64,
    ) -> Result<RowInit> {
        let Some(id) = self.layout.lang_emb else {
            return Ok(RowInit::default());
        };
        let dim = self.config.lang_emb_dim;
        let mut report = RowInit::default();
        for (row, code) in self.languages.iter().enumerate() {
            let values = match pretrained.and_then(|t| t.get(code).map(|v| (t.dim(), v))) {
                Some((d, _)) if d != dim => {
                    return Err(Error::Shape {
                        op: "init_language_rows",
                        operand: "pretrained",
                        expected: vec![dim],
                        found: vec![d],
                    })
                }
                Some((_, v)) => {
                    report.pretrained += 1;
                    v.to_vec()
                }
                None => {
                    report.random += 1;
                    random_row(seed, code, dim)
                }
            };
            self.store.get_mut(id).row_mut(row).copy_from_slice(&values);
        }
        Ok(report)
    }

    /// Current language rows as a table tagged with `epoch`.
    pub fn language_table(&self, epoch: usize) -> LanguageEmbeddingTable {
        let mut table = LanguageEmbeddingTable::new(epoch, self.config.lang_emb_dim);
        if let Some(id) = self.layout.lang_emb {
            let t = self.store.get(id);
            for (row, code) in self.languages.iter().enumerate() {
                table.insert(code.clone(), t.row(row).to_vec()).expect("row has table dim");
            }
        }
        table
    }

    fn bind(&self, g: &mut Graph) -> Bound {
        let s = &self.store;
        Bound {
            char_emb: g.param(s, self.layout.char_emb),
            char_fwd: self.layout.char_fwd.bind(g, s),
            char_bwd: self.layout.char_bwd.bind(g, s),
            word: self
                .layout
                .word
                .iter()
                .map(|(f, b)| (f.bind(g, s), b.bind(g, s)))
                .collect(),
            out_w: g.param(s, self.layout.out_w),
            out_b: g.param(s, self.layout.out_b),
            lang_emb: self.layout.lang_emb.map(|id| g.param(s, id)),
        }
    }

    fn lang_row(&self, lang: &str) -> Result<Option<usize>> {
        if !self.config.use_lang_emb {
            return Ok(None);
        }
        self.language_index(lang)
            .map(Some)
            .ok_or_else(|| Error::UnknownLanguage(lang.to_string()))
    }

    fn word_node(&self, g: &mut Graph, b: &Bound, word: &str, lang_row: Option<usize>) -> Result<NodeId> {
        if word.is_empty() {
            return Err(Error::invalid("word_representation", "empty word form"));
        }
        let chars = self
            .vocab
            .encode(word)
            .into_iter()
            .map(|i| g.row(b.char_emb, i))
            .collect::<Result<Vec<_>>>()?;
        let char_repr = bilstm_final(g, &chars, &b.char_fwd, &b.char_bwd)?;
        match (lang_row, b.lang_emb) {
            (Some(r), Some(table)) => {
                let l = g.row(table, r)?;
                g.concat(&[char_repr, l])
            }
            _ => Ok(char_repr),
        }
    }

    /// Logit node for every token of `forms`.
    fn logits(&self, g: &mut Graph, b: &Bound, forms: &[&str], lang: &str) -> Result<Vec<NodeId>> {
        if forms.is_empty() {
            return Err(Error::invalid("tag_sentence", "empty sentence"));
        }
        let row = self.lang_row(lang)?;
        let mut xs = forms
            .iter()
            .map(|w| self.word_node(g, b, w, row))
            .collect::<Result<Vec<_>>>()?;
        for (f, bw) in &b.word {
            xs = bilstm_layer(g, &xs, f, bw)?;
        }
        xs.into_iter()
            .map(|h| {
                let z = g.matvec(b.out_w, h)?;
                g.add(z, b.out_b)
            })
            .collect()
    }

    /// `[char_fwd_last ; char_bwd_first ; language row]` for one word.
    pub fn word_representation(&self, word: &str, lang: &str) -> Result<Vec<f64>> {
        let row = self.lang_row(lang)?;
        let mut g = Graph::new();
        let b = self.bind(&mut g);
        let n = self.word_node(&mut g, &b, word, row)?;
        Ok(g.value(n).to_vec())
    }

    /// Summed token cross-entropy for one sentence, as a graph root.
    fn sentence_loss(&self, g: &mut Graph, sentence: &Sentence, lang: &str) -> Result<NodeId> {
        let b = self.bind(g);
        let forms: Vec<&str> = sentence.forms().collect();
        let logits = self.logits(g, &b, &forms, lang)?;
        let losses = logits
            .into_iter()
            .zip(&sentence.tokens)
            .map(|(l, t)| {
                let target = self
                    .tag_index(&t.upos)
                    .ok_or_else(|| Error::invalid("train", format!("tag `{}` not in inventory", t.upos)))?;
                g.softmax_cross_entropy(l, target)
            })
            .collect::<Result<Vec<_>>>()?;
        g.add_n(&losses)
    }

    /// Loss value without gradients.
    pub fn loss(&self, sentence: &Sentence, lang: &str) -> Result<f64> {
        let mut g = Graph::new();
        let root = self.sentence_loss(&mut g, sentence, lang)?;
        Ok(g.scalar(root))
    }

    /// Loss of one sentence with its gradient written into the store; gradients
    /// of previous calls are discarded.
    pub fn loss_and_gradients(&mut self, sentence: &Sentence, lang: &str) -> Result<f64> {
        self.store.zero_grad();
        let mut g = Graph::new();
        let root = self.sentence_loss(&mut g, sentence, lang)?;
        g.backward(root)?;
        g.accumulate_param_grads(&mut self.store);
        Ok(g.scalar(root))
    }

    /// Argmax tag index per token; ties go to the lowest index.
    pub fn predict(&self, forms: &[&str], lang: &str) -> Result<Vec<usize>> {
        let mut g = Graph::new();
        let b = self.bind(&mut g);
        let logits = self.logits(&mut g, &b, forms, lang)?;
        Ok(logits.into_iter().map(|l| argmax(g.value(l))).collect())
    }

    pub fn tag_sentence(&self, sentence: &Sentence, lang: &str) -> Result<Vec<String>> {
        let forms: Vec<&str> = sentence.forms().collect();
        Ok(self
            .predict(&forms, lang)?
            .into_iter()
            .map(|i| self.tags[i].clone())
            .collect())
    }

    /// `(correct, total)` for each sentence of `corpus`, tagged as its own language.
    pub fn score_sentences(&self, corpus: &Corpus) -> Result<Vec<(usize, usize)>> {
        corpus
            .sentences
            .iter()
            .map(|s| {
                let pred = self.tag_sentence(s, &corpus.language)?;
                let correct = pred.iter().zip(&s.tokens).filter(|(p, t)| **p == t.upos).count();
                Ok((correct, s.len()))
            })
            .collect()
    }

    /// Token-level accuracy on `corpus`.
    pub fn evaluate(&self, corpus: &Corpus) -> Result<f64> {
        if corpus.num_tokens() == 0 {
            return Err(Error::EmptyCorpus(format!("{} {}", corpus.language, corpus.split)));
        }
        Ok(accuracy(&self.score_sentences(corpus)?))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let ckpt = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            model: self.clone(),
        };
        serde_json::to_writer(std::io::BufWriter::new(file), &ckpt)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        Ok(ckpt.model)
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    model: TaggerModel,
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(scores: &[(usize, usize)]) -> f64 {
    let (c, t) = scores.iter().fold((0, 0), |(c, t), (a, b)| (c + a, t + b));
    if t == 0 {
        0.0
    } else {
        c as f64 / t as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Split, Token};

    fn small_config() -> TaggerConfig {
        TaggerConfig {
            char_emb_dim: 6,
            char_lstm_hidden: 5,
            word_lstm_hidden: 4,
            lang_emb_dim: 3,
            ..TaggerConfig::default()
        }
    }

    fn model(cfg: TaggerConfig) -> TaggerModel {
        let vocab = CharVocab::from_chars("abcdefg".chars());
        TaggerModel::new(cfg, vocab, vec!["A".into(), "B".into(), "C".into()], vec!["fin".into(), "est".into()]).unwrap()
    }

    #[test]
    fn default_word_repr_is_264() {
        let vocab = CharVocab::from_chars("abc".chars());
        let m = TaggerModel::new(TaggerConfig::default(), vocab.clone(), vec!["X".into()], vec!["fin".into()]).unwrap();
        assert_eq!(m.word_representation("abc", "fin").unwrap().len(), 264);
        let cfg = TaggerConfig {
            use_lang_emb: false,
            ..TaggerConfig::default()
        };
        let m = TaggerModel::new(cfg, vocab, vec!["X".into()], vec![]).unwrap();
        assert_eq!(m.word_representation("abc", "fin").unwrap().len(), 200);
    }

    #[test]
    fn languages_differ_only_in_tail() {
        let m = model(small_config());
        let a = m.word_representation("bead", "fin").unwrap();
        let b = m.word_representation("bead", "est").unwrap();
        assert_eq!(a[..10], b[..10]);
        assert!(a[10..].iter().zip(&b[10..]).all(|(x, y)| x != y));
    }

    #[test]
    fn unknown_language_errors() {
        let m = model(small_config());
        assert!(matches!(m.word_representation("a", "hun"), Err(Error::UnknownLanguage(_))));
        let m = model(TaggerConfig {
            use_lang_emb: false,
            ..small_config()
        });
        assert!(m.word_representation("a", "hun").is_ok());
    }

    #[test]
    fn zeroed_output_layer_picks_first_tag() {
        let mut m = model(small_config());
        let w = m.layout.out_w;
        m.store.get_mut(w).values_mut().iter_mut().for_each(|v| *v = 0.0);
        let s = Sentence::new(vec![Token::new("abc", "B"), Token::new("gfe", "C")]);
        assert_eq!(m.tag_sentence(&s, "fin").unwrap(), vec!["A", "A"]);
        let one = Sentence::new(vec![Token::new("x", "B")]);
        assert_eq!(m.tag_sentence(&one, "fin").unwrap().len(), 1);
        assert!(m.tag_sentence(&Sentence::new(vec![]), "fin").is_err());
    }

    #[test]
    fn evaluate_counts_tokens() {
        let mut m = model(small_config());
        let w = m.layout.out_w;
        m.store.get_mut(w).values_mut().iter_mut().for_each(|v| *v = 0.0);
        // always predicts "A": 3 of 4 gold tags are A
        let c = Corpus::new(
            "fin",
            Split::Test,
            vec![
                Sentence::new(vec![Token::new("ab", "A"), Token::new("cd", "A")]),
                Sentence::new(vec![Token::new("ef", "A"), Token::new("g", "B")]),
            ],
        );
        assert_eq!(m.evaluate(&c).unwrap(), 0.75);
        assert!(m.evaluate(&Corpus::new("fin", Split::Test, vec![])).is_err());
    }

    #[test]
    fn pretrained_rows_copied_and_random_rows_seeded() {
        let mut m = model(small_config());
        let mut table = LanguageEmbeddingTable::new(0, 3);
        table.insert("fin", vec![1.0, 2.0, 3.0]).unwrap();
        let r = m.init_language_rows(Some(&table), 9).unwrap();
        assert_eq!(r, RowInit { pretrained: 1, random: 1 });
        let snap = m.language_table(0);
        assert_eq!(snap.get("fin").unwrap(), &[1.0, 2.0, 3.0]);
        let est = snap.get("est").unwrap().to_vec();
        assert!(est.iter().map(|x| x * x).sum::<f64>() > 0.0);
        m.init_language_rows(Some(&table), 9).unwrap();
        assert_eq!(m.language_table(0).get("est").unwrap(), est.as_slice());

        let mut wrong = LanguageEmbeddingTable::new(0, 4);
        wrong.insert("fin", vec![0.0; 4]).unwrap();
        assert!(m.init_language_rows(Some(&wrong), 9).is_err());
    }

    #[test]
    fn checkpoint_roundtrip() {
        let m = model(small_config());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        m.save(&p).unwrap();
        assert_eq!(TaggerModel::load(&p).unwrap(), m);
    }
}
