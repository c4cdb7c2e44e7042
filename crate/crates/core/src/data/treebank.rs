use std::collections::BTreeMap;
use std::path::Path;

use crate::data::conllu::{parse_conllu, Corpus, Split};
use crate::data::sample::downsample;
use crate::error::{Error, Result};

/// The train/dev/test corpora available for one language.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Treebank {
    pub train: Option<Corpus>,
    pub dev: Option<Corpus>,
    pub test: Option<Corpus>,
}

impl Treebank {
    pub fn get(&self, split: Split) -> Option<&Corpus> {
        match split {
            Split::Train => self.train.as_ref(),
            Split::Dev => self.dev.as_ref(),
            Split::Test => self.test.as_ref(),
        }
    }

    fn slot(&mut self, split: Split) -> &mut Option<Corpus> {
        match split {
            Split::Train => &mut self.train,
            Split::Dev => &mut self.dev,
            Split::Test => &mut self.test,
        }
    }
}

/// Treebanks keyed by language code.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TreebankSet {
    pub languages: BTreeMap<String, Treebank>,
}

impl TreebankSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, corpus: Corpus) {
        let split = corpus.split;
        let language = corpus.language.clone();
        *self.languages.entry(language).or_default().slot(split) = Some(corpus);
    }

    pub fn get(&self, language: &str, split: Split) -> Option<&Corpus> {
        self.languages.get(language)?.get(split)
    }

    pub fn require(&self, language: &str, split: Split) -> Result<&Corpus> {
        self.get(language, split).ok_or_else(|| {
            Error::EmptyCorpus(format!("no {split} corpus for `{language}`"))
        })
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.languages.keys().map(String::as_str)
    }

    /// Reads every `<lang>.<split>.conllu` file in `dir`. Training corpora
    /// longer than `cap` sentences are down-sampled with `seed`.
    pub fn load_dir(dir: &Path, cap: usize, seed: u64) -> Result<Self> {
        let mut set = TreebankSet::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "conllu"))
            .collect();
        paths.sort();
        for path in paths {
            let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
            let Some((lang, split)) = stem.rsplit_once('.') else {
                log::warn!("skipping {}: expected <lang>.<split>.conllu", path.display());
                continue;
            };
            let Ok(split) = split.parse::<Split>() else {
                log::warn!("skipping {}: unknown split", path.display());
                continue;
            };
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let mut corpus = parse_conllu(&text, lang, split).map_err(|e| match e {
                Error::Parse { line, msg } => Error::Parse {
                    line,
                    msg: format!("{}: {msg}", path.display()),
                },
                other => other,
            })?;
            if split == Split::Train {
                corpus = downsample(&corpus, cap, seed);
            }
            set.insert(corpus);
        }
        if set.languages.is_empty() {
            return Err(Error::EmptyCorpus(format!(
                "no <lang>.<split>.conllu files in {}",
                dir.display()
            )));
        }
        Ok(set)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for tb in self.languages.values() {
            for c in [&tb.train, &tb.dev, &tb.test].into_iter().flatten() {
                let path = dir.join(format!("{}.{}.conllu", c.language, c.split));
                std::fs::write(&path, crate::data::conllu::to_conllu(c))
                    .map_err(|e| Error::io(&path, e))?;
            }
        }
        Ok(())
    }
}
