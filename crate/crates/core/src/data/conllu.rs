//! Reader and writer for the subset of CoNLL-U the tagger needs: word form
//! (column 2) and UPOS (column 4).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub form: String,
    pub upos: String,
}

impl Token {
    pub fn new(form: impl Into<String>, upos: impl Into<String>) -> Self {
        Token {
            form: form.into(),
            upos: upos.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub language: String,
    pub split: Split,
    pub sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn new(language: impl Into<String>, split: Split, sentences: Vec<Sentence>) -> Self {
        Corpus {
            language: language.into(),
            split,
            sentences,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| &s.tokens)
    }
}

/// Parses CoNLL-U text into a corpus. Multiword ranges (`1-2`) and empty
/// nodes (`1.1`) are dropped.
pub fn parse_conllu(text: &str, language: &str, split: Split) -> Result<Corpus> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(Sentence::new(std::mem::take(&mut current)));
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        if id.parse::<usize>().is_err() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("invalid token id `{id}`"),
            });
        }
        if cols[1].is_empty() {
            return Err(Error::Parse {
                line: line_no,
                msg: "empty word form".into(),
            });
        }
        current.push(Token::new(cols[1], cols[3]));
    }
    if !current.is_empty() {
        sentences.push(Sentence::new(current));
    }
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus(format!("{language} {split}: no sentences")));
    }
    Ok(Corpus::new(language, split, sentences))
}

/// Writes the corpus back as CoNLL-U with placeholder columns.
pub fn to_conllu(corpus: &Corpus) -> String {
    let mut out = String::new();
    for s in &corpus.sentences {
        for (i, t) in s.tokens.iter().enumerate() {
            out.push_str(&format!("{}\t{}\t_\t{}\t_\t_\t_\t_\t_\t_\n", i + 1, t.form, t.upos));
        }
        out.push('\n');
    }
    out
}
