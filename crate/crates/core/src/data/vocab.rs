use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::conllu::Corpus;
use crate::error::{Error, Result};

pub const UNK: usize = 0;

/// Character inventory. Index 0 is reserved for unknown characters; known
/// characters follow in codepoint order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharVocab {
    chars: BTreeMap<char, usize>,
}

impl CharVocab {
    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Self {
        let set: BTreeSet<char> = chars.into_iter().collect();
        let chars = set.into_iter().enumerate().map(|(i, c)| (c, i + 1)).collect();
        CharVocab { chars }
    }

    /// Number of indices, including UNK.
    pub fn len(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, c: char) -> usize {
        self.chars.get(&c).copied().unwrap_or(UNK)
    }

    pub fn encode(&self, word: &str) -> Vec<usize> {
        word.chars().map(|c| self.index(c)).collect()
    }

    pub fn chars(&self) -> impl Iterator<Item = (char, usize)> + '_ {
        self.chars.iter().map(|(c, i)| (*c, *i))
    }
}

pub fn build_char_vocab(corpora: &[&Corpus]) -> Result<CharVocab> {
    if corpora.is_empty() {
        return Err(Error::invalid("build_char_vocab", "no corpora"));
    }
    Ok(CharVocab::from_chars(
        corpora.iter().flat_map(|c| c.tokens()).flat_map(|t| t.form.chars()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::conllu::{Sentence, Split, Token};

    fn corpus(lang: &str, forms: &[&str]) -> Corpus {
        Corpus::new(
            lang,
            Split::Train,
            vec![Sentence::new(forms.iter().map(|f| Token::new(*f, "X")).collect())],
        )
    }

    #[test]
    fn ab_ba() {
        let v = build_char_vocab(&[&corpus("x", &["ab", "ba"])]).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!((v.index('a'), v.index('b'), v.index('z')), (1, 2, UNK));
    }

    #[test]
    fn disjoint_languages_union() {
        let a = corpus("a", &["ab"]);
        let b = corpus("b", &["αβ"]);
        let v = build_char_vocab(&[&a, &b]).unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v, build_char_vocab(&[&b, &a]).unwrap());
    }

    #[test]
    fn empty_list_rejected() {
        assert!(build_char_vocab(&[]).is_err());
    }
}
