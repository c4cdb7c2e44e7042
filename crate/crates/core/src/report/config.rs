//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated; an empty value means "unset" for optional keys and
//! "empty" for lists. Relative paths in a file are resolved against the
//! file's directory. [`RunConfig::to_resolved`] writes every key in a fixed
//! order and parses back to the same configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::AdamConfig;
use crate::probe::{DEFAULT_DELTA, DEFAULT_FOLDS, DEFAULT_LAMBDA, URALIC};
use crate::tagger::TaggerConfig;
use crate::transfer::{DEFAULT_PERMUTATIONS, DEFAULT_SEEDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    /// train on all languages and save language-embedding snapshots
    Train,
    Mono,
    Bi,
    Probe,
    Heldout,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Train, Stage::Mono, Stage::Bi, Stage::Probe, Stage::Heldout];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Train => "train",
            Stage::Mono => "mono",
            Stage::Bi => "bi",
            Stage::Probe => "probe",
            Stage::Heldout => "heldout",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// directory of `<lang>.<split>.conllu` files
    pub treebanks: Option<PathBuf>,
    /// pretrained language embeddings (epoch 0)
    pub embeddings: Option<PathBuf>,
    pub wals: Option<PathBuf>,
    /// precomputed `langemb.e{N}.vec` snapshots; skips the train stage
    pub snapshots: Option<PathBuf>,
    pub output: PathBuf,
    /// treebank languages to use; empty means all found
    pub languages: Vec<String>,
    pub targets: Vec<String>,
    /// bilingual helpers; empty means all languages
    pub helpers: Vec<String>,
    pub mono_baseline: Option<String>,
    pub heldout: Vec<String>,
    /// WALS features to probe; empty means every feature in the table
    pub features: Vec<String>,
    pub stages: Vec<Stage>,
    pub tagger: TaggerConfig,
    pub seeds: Vec<u64>,
    pub downsample: usize,
    pub downsample_seed: u64,
    pub snapshot_epochs: usize,
    pub permutations: usize,
    pub delta: f64,
    pub lambda: f64,
    pub folds: usize,
    pub probe_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            treebanks: None,
            embeddings: None,
            wals: None,
            snapshots: None,
            output: PathBuf::from("runs"),
            languages: Vec::new(),
            targets: URALIC.iter().map(|s| s.to_string()).collect(),
            helpers: Vec::new(),
            mono_baseline: None,
            heldout: URALIC.iter().map(|s| s.to_string()).collect(),
            features: Vec::new(),
            stages: Stage::ALL.to_vec(),
            tagger: TaggerConfig::default(),
            seeds: DEFAULT_SEEDS.to_vec(),
            downsample: crate::data::DEFAULT_SENTENCE_CAP,
            downsample_seed: 1,
            snapshot_epochs: 5,
            permutations: DEFAULT_PERMUTATIONS,
            delta: DEFAULT_DELTA,
            lambda: DEFAULT_LAMBDA,
            folds: DEFAULT_FOLDS,
            probe_seed: 1,
        }
    }
}

/// Every accepted key, in the order written by [`RunConfig::to_resolved`].
pub const KEYS: [&str; 31] = [
    "treebanks",
    "embeddings",
    "wals",
    "snapshots",
    "output",
    "languages",
    "targets",
    "helpers",
    "mono_baseline",
    "heldout",
    "features",
    "stages",
    "char_emb_dim",
    "char_lstm_hidden",
    "word_lstm_hidden",
    "word_lstm_layers",
    "lang_emb_dim",
    "epochs",
    "patience",
    "lang_emb",
    "learning_rate",
    "seed_list",
    "downsample",
    "downsample_seed",
    "snapshot_epochs",
    "permutations",
    "delta",
    "lambda",
    "folds",
    "probe_seed",
    "adam_epsilon",
];

fn list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn opt_path(v: &str, base: &Path) -> Option<PathBuf> {
    (!v.is_empty()).then(|| base.join(v))
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn show(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Sets one key. Relative paths are joined onto `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let v = value.trim();
        let t = &mut self.tagger;
        match key {
            "treebanks" => self.treebanks = opt_path(v, base),
            "embeddings" => self.embeddings = opt_path(v, base),
            "wals" => self.wals = opt_path(v, base),
            "snapshots" => self.snapshots = opt_path(v, base),
            "output" => {
                self.output = opt_path(v, base).ok_or_else(|| Error::Config("`output` may not be empty".into()))?
            }
            "languages" => self.languages = list(v),
            "targets" => self.targets = list(v),
            "helpers" => self.helpers = list(v),
            "mono_baseline" => self.mono_baseline = (!v.is_empty()).then(|| v.to_string()),
            "heldout" => self.heldout = list(v),
            "features" => self.features = list(v),
            "stages" => self.stages = list(v).iter().map(|s| s.parse()).collect::<Result<_>>()?,
            "char_emb_dim" => t.char_emb_dim = num(key, v)?,
            "char_lstm_hidden" => t.char_lstm_hidden = num(key, v)?,
            "word_lstm_hidden" => t.word_lstm_hidden = num(key, v)?,
            "word_lstm_layers" => t.word_lstm_layers = num(key, v)?,
            "lang_emb_dim" => t.lang_emb_dim = num(key, v)?,
            "epochs" => t.max_epochs = num(key, v)?,
            "patience" => t.early_stop_patience = num(key, v)?,
            "lang_emb" => t.use_lang_emb = num(key, v)?,
            "learning_rate" => t.adam.lr = num(key, v)?,
            "adam_epsilon" => t.adam.epsilon = num(key, v)?,
            "seed_list" => self.seeds = list(v).iter().map(|s| num(key, s)).collect::<Result<_>>()?,
            "downsample" => self.downsample = num(key, v)?,
            "downsample_seed" => self.downsample_seed = num(key, v)?,
            "snapshot_epochs" => self.snapshot_epochs = num(key, v)?,
            "permutations" => self.permutations = num(key, v)?,
            "delta" => self.delta = num(key, v)?,
            "lambda" => self.lambda = num(key, v)?,
            "folds" => self.folds = num(key, v)?,
            "probe_seed" => self.probe_seed = num(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(k.trim(), v, base)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_resolved(&self) -> String {
        let t = &self.tagger;
        let values: [String; 31] = [
            show(&self.treebanks),
            show(&self.embeddings),
            show(&self.wals),
            show(&self.snapshots),
            self.output.display().to_string(),
            join(&self.languages),
            join(&self.targets),
            join(&self.helpers),
            self.mono_baseline.clone().unwrap_or_default(),
            join(&self.heldout),
            join(&self.features),
            join(&self.stages),
            t.char_emb_dim.to_string(),
            t.char_lstm_hidden.to_string(),
            t.word_lstm_hidden.to_string(),
            t.word_lstm_layers.to_string(),
            t.lang_emb_dim.to_string(),
            t.max_epochs.to_string(),
            t.early_stop_patience.to_string(),
            t.use_lang_emb.to_string(),
            format!("{:?}", t.adam.lr),
            join(&self.seeds),
            self.downsample.to_string(),
            self.downsample_seed.to_string(),
            self.snapshot_epochs.to_string(),
            self.permutations.to_string(),
            format!("{:?}", self.delta),
            format!("{:?}", self.lambda),
            self.folds.to_string(),
            self.probe_seed.to_string(),
            format!("{:?}", t.adam.epsilon),
        ];
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(values) {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    pub fn has(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    /// The train stage runs when requested, or when a probe stage needs
    /// snapshots and none were supplied.
    pub fn runs_training(&self) -> bool {
        self.has(Stage::Train) || ((self.has(Stage::Probe) || self.has(Stage::Heldout)) && self.snapshots.is_none())
    }

    pub fn needs_treebanks(&self) -> bool {
        self.runs_training() || self.has(Stage::Mono) || self.has(Stage::Bi)
    }

    /// Checks values and that every referenced input exists. All failures
    /// are configuration errors.
    pub fn validate(&self) -> Result<()> {
        self.tagger.validate()?;
        let AdamConfig { beta1, beta2, epsilon, .. } = self.tagger.adam;
        if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && epsilon > 0.0) {
            return Err(Error::Config("invalid Adam hyperparameters".into()));
        }
        if self.stages.is_empty() {
            return Err(Error::Config("no stages selected".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("`seed_list` is empty".into()));
        }
        if self.downsample == 0 || self.snapshot_epochs == 0 || self.permutations == 0 {
            return Err(Error::Config(
                "`downsample`, `snapshot_epochs` and `permutations` must be positive".into(),
            ));
        }
        crate::probe::PatternRule::new(self.delta)?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("`lambda` must be finite and ≥ 0, got {}", self.lambda)));
        }
        if self.folds < 2 {
            return Err(Error::Config("`folds` must be at least 2".into()));
        }
        let require = |key: &str, p: &Option<PathBuf>, needed: bool| -> Result<()> {
            match p {
                Some(p) if !p.exists() => Err(Error::Config(format!("`{key}`: {} does not exist", p.display()))),
                None if needed => Err(Error::Config(format!("`{key}` is required for stages {}", join(&self.stages)))),
                _ => Ok(()),
            }
        };
        require("treebanks", &self.treebanks, self.needs_treebanks())?;
        require("embeddings", &self.embeddings, false)?;
        require("wals", &self.wals, self.has(Stage::Probe) || self.has(Stage::Heldout))?;
        require("snapshots", &self.snapshots, false)?;
        if self.has(Stage::Heldout) && self.heldout.is_empty() {
            return Err(Error::Config("`heldout` is empty".into()));
        }
        Ok(())
    }
}
