//! Synthetic languages with known tagging rules, used for desk-scale
//! experiments and for the end-to-end fixture.
//!
//! Every language generates sentences from the same template
//! `DET? ADJ{0,2} NOUN VERB (ADP DET? ADJ{0,2} NOUN)? PUNCT`. Open-class words
//! are random consonant-vowel stems plus a class suffix; closed classes come
//! from short word lists. A language chooses the surface alphabet, the class
//! suffixes and the tag emitted for each word class, so two languages can
//! share rules but not characters, or share characters but not rules.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Corpus, Sentence, Split, Token};

const CONSONANTS: &str = "ptkmnslrvh";
const VOWELS: &str = "aeiou";

/// Base letters (`ptkmnslrvhaeiou`) followed by the sentence terminator.
pub const LATIN: [char; 16] = [
    'p', 't', 'k', 'm', 'n', 's', 'l', 'r', 'v', 'h', 'a', 'e', 'i', 'o', 'u', '.',
];
pub const GREEK: [char; 16] = [
    'π', 'τ', 'κ', 'μ', 'ν', 'σ', 'λ', 'ρ', 'β', 'η', 'α', 'ε', 'ι', 'ο', 'υ', ';',
];
pub const CYRILLIC: [char; 16] = [
    'п', 'т', 'к', 'м', 'н', 'с', 'л', 'р', 'в', 'х', 'а', 'е', 'и', 'о', 'у', '!',
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordClass {
    Det,
    Adj,
    Noun,
    Verb,
    Adp,
    Punct,
}

impl WordClass {
    pub const ALL: [WordClass; 6] = [
        WordClass::Det,
        WordClass::Adj,
        WordClass::Noun,
        WordClass::Verb,
        WordClass::Adp,
        WordClass::Punct,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

pub const UD_TAGS: [&str; 6] = ["DET", "ADJ", "NOUN", "VERB", "ADP", "PUNCT"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticLanguage {
    pub code: String,
    pub alphabet: [char; 16],
    /// tag emitted for each [`WordClass`], in `WordClass::ALL` order
    pub class_tags: [&'static str; 6],
    /// suffixes for ADJ, NOUN, VERB, in base letters
    pub suffixes: [&'static str; 3],
    pub determiners: [&'static str; 3],
    pub adpositions: [&'static str; 3],
}

impl SyntheticLanguage {
    pub fn new(code: impl Into<String>) -> Self {
        SyntheticLanguage {
            code: code.into(),
            alphabet: LATIN,
            class_tags: UD_TAGS,
            suffixes: ["ek", "om", "ut"],
            determiners: ["ta", "se", "nu"],
            adpositions: ["po", "ki", "lo"],
        }
    }

    /// Same rules, different surface characters.
    pub fn with_alphabet(mut self, alphabet: [char; 16]) -> Self {
        self.alphabet = alphabet;
        self
    }

    /// Same words, but the tags of NOUN/ADJ and DET/ADP are exchanged.
    pub fn with_conflicting_tags(mut self) -> Self {
        self.class_tags = ["ADP", "NOUN", "ADJ", "VERB", "DET", "PUNCT"];
        self
    }

    pub fn with_suffixes(mut self, suffixes: [&'static str; 3]) -> Self {
        self.suffixes = suffixes;
        self
    }

    pub fn with_closed_classes(mut self, determiners: [&'static str; 3], adpositions: [&'static str; 3]) -> Self {
        self.determiners = determiners;
        self.adpositions = adpositions;
        self
    }

    fn surface(&self, base: &str) -> String {
        base.chars()
            .map(|c| {
                let i = LATIN.iter().position(|b| *b == c).expect("base letter");
                self.alphabet[i]
            })
            .collect()
    }

    fn word<R: Rng>(&self, class: WordClass, rng: &mut R) -> String {
        let consonants: Vec<char> = CONSONANTS.chars().collect();
        let vowels: Vec<char> = VOWELS.chars().collect();
        let base = match class {
            WordClass::Det => self.determiners.choose(rng).unwrap().to_string(),
            WordClass::Adp => self.adpositions.choose(rng).unwrap().to_string(),
            WordClass::Punct => ".".to_string(),
            open => {
                let syllables = rng.random_range(1..=2);
                let mut stem = String::new();
                for _ in 0..syllables {
                    stem.push(*consonants.choose(rng).unwrap());
                    stem.push(*vowels.choose(rng).unwrap());
                }
                let suffix = match open {
                    WordClass::Adj => self.suffixes[0],
                    WordClass::Noun => self.suffixes[1],
                    _ => self.suffixes[2],
                };
                stem + suffix
            }
        };
        self.surface(&base)
    }

    fn noun_phrase<R: Rng>(&self, rng: &mut R, out: &mut Vec<WordClass>) {
        if rng.random_bool(0.6) {
            out.push(WordClass::Det);
        }
        for _ in 0..rng.random_range(0..=2) {
            out.push(WordClass::Adj);
        }
        out.push(WordClass::Noun);
    }

    pub fn sentence<R: Rng>(&self, rng: &mut R) -> Sentence {
        let mut classes = Vec::new();
        self.noun_phrase(rng, &mut classes);
        classes.push(WordClass::Verb);
        if rng.random_bool(0.5) {
            classes.push(WordClass::Adp);
            self.noun_phrase(rng, &mut classes);
        }
        classes.push(WordClass::Punct);
        Sentence::new(
            classes
                .into_iter()
                .map(|c| Token::new(self.word(c, rng), self.class_tags[c.index()]))
                .collect(),
        )
    }

    pub fn corpus(&self, split: Split, n: usize, seed: u64) -> Corpus {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(split as u64 + 1);
        let sentences = (0..n).map(|_| self.sentence(&mut rng)).collect();
        Corpus::new(self.code.clone(), split, sentences)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn twin_alphabets_are_disjoint() {
        let a = SyntheticLanguage::new("a").corpus(Split::Train, 50, 1);
        let b = SyntheticLanguage::new("b").with_alphabet(GREEK).corpus(Split::Train, 50, 1);
        let ca: BTreeSet<char> = a.tokens().flat_map(|t| t.form.chars()).collect();
        let cb: BTreeSet<char> = b.tokens().flat_map(|t| t.form.chars()).collect();
        assert!(ca.is_disjoint(&cb));
        // same seed and rules: identical tag sequences
        let ta: Vec<_> = a.tokens().map(|t| &t.upos).collect();
        let tb: Vec<_> = b.tokens().map(|t| &t.upos).collect();
        assert_eq!(ta, tb);
    }

    #[test]
    fn conflicting_language_shares_forms() {
        let a = SyntheticLanguage::new("a").corpus(Split::Train, 20, 3);
        let b = SyntheticLanguage::new("b").with_conflicting_tags().corpus(Split::Train, 20, 3);
        let fa: Vec<_> = a.tokens().map(|t| &t.form).collect();
        let fb: Vec<_> = b.tokens().map(|t| &t.form).collect();
        assert_eq!(fa, fb);
        assert!(a.tokens().zip(b.tokens()).any(|(x, y)| x.upos != y.upos));
    }

    #[test]
    fn splits_differ() {
        let l = SyntheticLanguage::new("a");
        assert_ne!(l.corpus(Split::Train, 10, 1).sentences, l.corpus(Split::Test, 10, 1).sentences);
    }
}
