//! Monolingual and bilingual transfer grids.
//!
//! Each (training languages, embedding setting, seed) triple trains one
//! private model; cells aggregate its test accuracies over seeds. Jobs run
//! on the rayon pool and are collected in submission order, so results do
//! not depend on scheduling.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::data::{Corpus, LanguageEmbeddingTable, Split, TreebankSet};
use crate::error::{Error, Result};
use crate::tagger::{train, TaggerConfig, TaggerModel};
use crate::transfer::stats::{average_over_seeds, significance_test, DEFAULT_PERMUTATIONS};

pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// Test-set outcome of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub accuracy: f64,
    /// `(correct, total)` per test sentence
    pub sentences: Vec<(usize, usize)>,
}

impl SeedRun {
    pub fn sentence_accuracies(&self) -> impl Iterator<Item = f64> + '_ {
        self.sentences.iter().map(|(c, t)| *c as f64 / *t as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub against: Vec<String>,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferResult {
    pub train_langs: Vec<String>,
    pub test_lang: String,
    pub use_lang_emb: bool,
    pub seeds: Vec<u64>,
    pub runs: Vec<SeedRun>,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
    pub error: Option<String>,
    pub comparison: Option<Comparison>,
}

impl TransferResult {
    pub fn train_label(&self) -> String {
        self.train_langs.join("+")
    }

    pub fn per_seed(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.accuracy).collect()
    }

    /// Per-sentence accuracies pooled over seeds in seed order.
    pub fn pooled_sentences(&self) -> Vec<f64> {
        self.runs.iter().flat_map(|r| r.sentence_accuracies()).collect()
    }
}

/// Shared inputs for a grid run.
#[derive(Debug, Clone)]
pub struct GridSetup<'a> {
    pub data: &'a TreebankSet,
    pub pretrained: Option<&'a LanguageEmbeddingTable>,
    pub config: TaggerConfig,
    pub seeds: Vec<u64>,
    /// embedding settings to run, in output order
    pub settings: Vec<bool>,
    pub permutations: usize,
}

impl<'a> GridSetup<'a> {
    pub fn new(data: &'a TreebankSet, config: TaggerConfig) -> Self {
        GridSetup {
            data,
            pretrained: None,
            config,
            seeds: DEFAULT_SEEDS.to_vec(),
            settings: vec![true, false],
            permutations: DEFAULT_PERMUTATIONS,
        }
    }
}

#[derive(Debug, Clone)]
struct Job {
    train_langs: Vec<String>,
    use_lang_emb: bool,
    seed: u64,
    test_langs: Vec<String>,
}

type JobOutcome = std::result::Result<BTreeMap<String, std::result::Result<SeedRun, String>>, String>;

fn run_job(setup: &GridSetup, job: &Job, all_langs: &[String]) -> JobOutcome {
    let train_corpora: Vec<Corpus> = job
        .train_langs
        .iter()
        .map(|l| setup.data.require(l, Split::Train).cloned())
        .collect::<Result<_>>()
        .map_err(|e| e.to_string())?;
    let dev: Vec<Corpus> = job
        .train_langs
        .iter()
        .filter_map(|l| setup.data.get(l, Split::Dev).cloned())
        .collect();
    let config = TaggerConfig {
        use_lang_emb: job.use_lang_emb,
        seed: job.seed,
        ..setup.config.clone()
    };
    let refs: Vec<&Corpus> = train_corpora.iter().collect();
    let model = TaggerModel::for_corpora(config, &refs, all_langs, setup.pretrained)
        .map_err(|e| e.to_string())?;
    let (model, _) = train(model, &train_corpora, &dev).map_err(|e| e.to_string())?;

    let mut out = BTreeMap::new();
    for test in &job.test_langs {
        let r = setup
            .data
            .require(test, Split::Test)
            .and_then(|c| {
                let sentences = model.score_sentences(c)?;
                if sentences.is_empty() {
                    return Err(Error::EmptyCorpus(format!("{test} test")));
                }
                Ok(SeedRun {
                    seed: job.seed,
                    accuracy: crate::tagger::accuracy(&sentences),
                    sentences,
                })
            })
            .map_err(|e| e.to_string());
        out.insert(test.clone(), r);
    }
    Ok(out)
}

fn run_jobs(setup: &GridSetup, jobs: &[Job], all_langs: &[String]) -> Vec<JobOutcome> {
    jobs.par_iter().map(|j| run_job(setup, j, all_langs)).collect()
}

fn assemble(
    setup: &GridSetup,
    train_langs: &[String],
    test_lang: &str,
    use_lang_emb: bool,
    outcomes: &[(&Job, &JobOutcome)],
) -> TransferResult {
    let mut runs = Vec::new();
    let mut error = None;
    for (job, outcome) in outcomes {
        if job.train_langs != train_langs || job.use_lang_emb != use_lang_emb {
            continue;
        }
        match outcome {
            Err(e) => error = Some(e.clone()),
            Ok(map) => match map.get(test_lang) {
                Some(Ok(run)) => runs.push(run.clone()),
                Some(Err(e)) => error = Some(e.clone()),
                None => error = Some(format!("`{test_lang}` not evaluated")),
            },
        }
    }
    let (mean, stddev) = if error.is_none() && !runs.is_empty() {
        let (m, s) = average_over_seeds(&runs.iter().map(|r| r.accuracy).collect::<Vec<_>>())
            .expect("non-empty");
        (Some(m), Some(s))
    } else {
        runs.clear();
        (None, None)
    };
    TransferResult {
        train_langs: train_langs.to_vec(),
        test_lang: test_lang.to_string(),
        use_lang_emb,
        seeds: setup.seeds.clone(),
        runs,
        mean,
        stddev,
        error,
        comparison: None,
    }
}

fn compare(a: &TransferResult, b: &TransferResult, permutations: usize, seed: u64) -> Option<Comparison> {
    if a.error.is_some() || b.error.is_some() {
        return None;
    }
    let p = significance_test(&a.pooled_sentences(), &b.pooled_sentences(), permutations, seed).ok()?;
    Some(Comparison {
        against: b.train_langs.clone(),
        p_value: p,
    })
}

/// Trains on each language alone and tests on every language, for every
/// embedding setting. When `baseline` names one of `langs`, every other
/// source is compared against it on the same test language.
pub fn run_monolingual_grid(
    setup: &GridSetup,
    langs: &[String],
    baseline: Option<&str>,
) -> Vec<TransferResult> {
    let mut jobs = Vec::new();
    for train_lang in langs {
        for &setting in &setup.settings {
            for &seed in &setup.seeds {
                jobs.push(Job {
                    train_langs: vec![train_lang.clone()],
                    use_lang_emb: setting,
                    seed,
                    test_langs: langs.to_vec(),
                });
            }
        }
    }
    let outcomes = run_jobs(setup, &jobs, langs);
    let paired: Vec<(&Job, &JobOutcome)> = jobs.iter().zip(&outcomes).collect();

    let mut cells = Vec::new();
    for train_lang in langs {
        for test_lang in langs {
            for &setting in &setup.settings {
                cells.push(assemble(setup, std::slice::from_ref(train_lang), test_lang, setting, &paired));
            }
        }
    }
    if let Some(base) = baseline {
        let lookup: BTreeMap<(String, String, bool), TransferResult> = cells
            .iter()
            .filter(|c| c.train_langs == [base])
            .map(|c| ((c.train_label(), c.test_lang.clone(), c.use_lang_emb), c.clone()))
            .collect();
        for cell in cells.iter_mut().filter(|c| c.train_langs != [base]) {
            if let Some(b) = lookup.get(&(base.to_string(), cell.test_lang.clone(), cell.use_lang_emb)) {
                cell.comparison = compare(cell, b, setup.permutations, setup.seeds.first().copied().unwrap_or(0));
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilingualGrid {
    /// target × helper × setting, helper ≠ target
    pub cells: Vec<TransferResult>,
    /// monolingual reference per target × setting
    pub monolingual: Vec<TransferResult>,
}

/// Trains on target + helper for every helper other than the target and
/// tests on the target. Each cell is compared against the monolingual
/// target model with the same embedding setting.
pub fn run_bilingual_grid(setup: &GridSetup, targets: &[String], helpers: &[String]) -> BilingualGrid {
    let mut all_langs: Vec<String> = targets.iter().chain(helpers).cloned().collect();
    all_langs.sort();
    all_langs.dedup();

    let mut jobs = Vec::new();
    for target in targets {
        for &setting in &setup.settings {
            for &seed in &setup.seeds {
                jobs.push(Job {
                    train_langs: vec![target.clone()],
                    use_lang_emb: setting,
                    seed,
                    test_langs: vec![target.clone()],
                });
                for helper in helpers.iter().filter(|h| *h != target) {
                    jobs.push(Job {
                        train_langs: vec![target.clone(), helper.clone()],
                        use_lang_emb: setting,
                        seed,
                        test_langs: vec![target.clone()],
                    });
                }
            }
        }
    }
    let outcomes = run_jobs(setup, &jobs, &all_langs);
    let paired: Vec<(&Job, &JobOutcome)> = jobs.iter().zip(&outcomes).collect();

    let mut cells = Vec::new();
    let mut monolingual = Vec::new();
    for target in targets {
        for &setting in &setup.settings {
            let mono = assemble(setup, std::slice::from_ref(target), target, setting, &paired);
            for helper in helpers.iter().filter(|h| *h != target) {
                let mut cell = assemble(setup, &[target.clone(), helper.clone()], target, setting, &paired);
                cell.comparison = compare(&cell, &mono, setup.permutations, setup.seeds.first().copied().unwrap_or(0));
                cells.push(cell);
            }
            monolingual.push(mono);
        }
    }
    BilingualGrid { cells, monolingual }
}
