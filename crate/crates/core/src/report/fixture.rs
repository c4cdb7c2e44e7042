//! Self-contained synthetic inputs for an end-to-end run: treebanks for five
//! languages, a 64-d embedding table covering thirty languages and a WALS
//! table whose features are planted in known embedding coordinates.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{LanguageEmbeddingTable, Split, TreebankSet};
use crate::error::{Error, Result};
use crate::report::svg::write_file;
use crate::synthetic::{SyntheticLanguage, CYRILLIC, GREEK};

pub const FIXTURE_DIM: usize = 64;
pub const EXTRA_LANGUAGES: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixtureOptions {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        FixtureOptions {
            train: 60,
            dev: 15,
            test: 30,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixturePaths {
    pub treebanks: PathBuf,
    pub embeddings: PathBuf,
    pub wals: PathBuf,
    pub config: PathBuf,
}

/// The five treebank languages: two near-identical Latin-script languages,
/// two script-shifted copies of the same rules and one language that reuses
/// the Latin forms with different tags.
pub fn fixture_languages() -> Vec<SyntheticLanguage> {
    vec![
        SyntheticLanguage::new("fin"),
        SyntheticLanguage::new("est").with_suffixes(["ek", "on", "us"]),
        SyntheticLanguage::new("hun").with_alphabet(GREEK),
        SyntheticLanguage::new("sme").with_alphabet(CYRILLIC).with_suffixes(["ak", "em", "it"]),
        SyntheticLanguage::new("spa")
            .with_conflicting_tags()
            .with_closed_classes(["la", "el", "un"], ["en", "ve", "por"]),
    ]
}

/// Feature ids with the coordinate that carries them, or `None` for noise.
const PLANTED: [(&str, Option<usize>, [&str; 2]); 3] = [
    ("81A", Some(0), ["SOV", "SVO"]),
    ("86A", Some(1), ["Genitive-Noun", "Noun-Genitive"]),
    ("26A", None, ["Prefixing", "Suffixing"]),
];

fn embedding_table(codes: &[String], rng: &mut ChaCha8Rng) -> (LanguageEmbeddingTable, Vec<String>) {
    let noise = Normal::new(0.0, 0.1).expect("valid σ");
    let mut table = LanguageEmbeddingTable::new(0, FIXTURE_DIM);
    let mut wals = vec!["language_code,feature_id,value".to_string()];
    for (i, code) in codes.iter().enumerate() {
        let mut v: Vec<f64> = (0..FIXTURE_DIM).map(|_| noise.sample(rng)).collect();
        for (feature, coord, classes) in PLANTED {
            // alternate classes so both are well represented
            let class = match coord {
                Some(c) => {
                    let positive = (i >> c) % 2 == 0;
                    v[c] += if positive { 1.0 } else { -1.0 };
                    usize::from(!positive)
                }
                None => rng.random_range(0..2),
            };
            wals.push(format!("{code},{feature},{}", classes[class]));
        }
        // a feature with a single attested class is never usable
        wals.push(format!("{code},1A,Average"));
        table.insert(code.clone(), v).expect("fixture dim");
    }
    (table, wals)
}

const CONFIG: &str = "\
# synthetic fixture: small model, two seeds
treebanks = treebanks
embeddings = embeddings.vec
wals = wals.csv
output = runs
char_emb_dim = 8
char_lstm_hidden = 8
word_lstm_hidden = 8
word_lstm_layers = 1
lang_emb_dim = 64
epochs = 3
patience = 2
learning_rate = 0.01
seed_list = 1,2
snapshot_epochs = 3
permutations = 1000
mono_baseline = spa
";

pub fn write_fixture(dir: &Path, opts: &FixtureOptions) -> Result<FixturePaths> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut set = TreebankSet::new();
    for (i, lang) in fixture_languages().iter().enumerate() {
        let seed = opts.seed.wrapping_mul(31).wrapping_add(i as u64);
        set.insert(lang.corpus(Split::Train, opts.train, seed));
        set.insert(lang.corpus(Split::Dev, opts.dev, seed));
        set.insert(lang.corpus(Split::Test, opts.test, seed));
    }
    let treebanks = dir.join("treebanks");
    set.write_dir(&treebanks)?;

    let mut codes: Vec<String> = set.codes().map(String::from).collect();
    codes.extend((0..EXTRA_LANGUAGES).map(|i| format!("x{i:02}")));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (table, wals_lines) = embedding_table(&codes, &mut rng);
    let embeddings = dir.join("embeddings.vec");
    table.save(&embeddings)?;
    let wals = dir.join("wals.csv");
    write_file(&wals, &(wals_lines.join("\n") + "\n"))?;
    let config = dir.join("fixture.conf");
    write_file(&config, CONFIG)?;
    Ok(FixturePaths {
        treebanks,
        embeddings,
        wals,
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_embeddings_file, load_wals_file};

    #[test]
    fn fixture_files_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_fixture(dir.path(), &FixtureOptions::default()).unwrap();
        let tb = TreebankSet::load_dir(&p.treebanks, 1500, 1).unwrap();
        assert_eq!(tb.codes().collect::<Vec<_>>(), ["est", "fin", "hun", "sme", "spa"]);
        let emb = load_embeddings_file(&p.embeddings).unwrap();
        assert_eq!((emb.len(), emb.dim()), (30, 64));
        let wals = load_wals_file(&p.wals).unwrap();
        assert_eq!(wals.features().collect::<Vec<_>>(), ["1A", "26A", "81A", "86A"]);
        assert!(wals.values("81A").unwrap().values().any(|v| v == "SOV"));
    }

    #[test]
    fn fixture_is_reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let pa = write_fixture(a.path(), &FixtureOptions::default()).unwrap();
        let pb = write_fixture(b.path(), &FixtureOptions::default()).unwrap();
        for (x, y) in [(&pa.embeddings, &pb.embeddings), (&pa.wals, &pb.wals)] {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
    }
}
