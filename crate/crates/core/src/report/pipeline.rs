//! Stage orchestration. Every run writes into a fresh timestamped directory
//! under the configured output directory:
//!
//! ```text
//! config.resolved            every key, resolved
//! errors.json                failed cells/features and any fatal error
//! snapshots/langemb.eN.vec   language tables after N epochs (train stage)
//! checkpoint/tagger.json     best all-language model (train stage)
//! train_log.csv
//! mono_{runs,summary,sentences}.csv
//! bi_{runs,summary,sentences}.csv
//! probe.csv, probe_skipped.csv
//! heldout_uralic.csv, heldout_skipped.csv
//! figures/*.svg
//! ```
//!
//! `latest` next to the run directories points at the most recent run.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::data::{
    load_embeddings_file, load_snapshot_dir, load_wals_file, snapshot_file_name, Corpus, LanguageEmbeddingTable,
    Split, TreebankSet, WalsFeatureTable,
};
use crate::error::{Error, ErrorKind, Result};
use crate::probe::{
    heldout_features, heldout_rows, probe_features, probe_rows, PatternRule, ProbeOptions, SkippedFeature,
};
use crate::report::config::{RunConfig, Stage};
use crate::report::svg::{render_grid_bars, render_trajectories, write_file, Trajectory};
use crate::tagger::{train, TaggerConfig, TaggerModel};
use crate::transfer::csv_io::{run_rows, sentence_rows, summary_rows, write_rows};
use crate::transfer::{run_bilingual_grid, run_monolingual_grid, GridSetup, TransferResult};

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Config => 1,
        ErrorKind::Data => 2,
        ErrorKind::Runtime => 3,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub stage: String,
    pub item: String,
    pub message: String,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub failures: Vec<ManifestEntry>,
    pub fatal: Option<Error>,
}

impl RunOutcome {
    /// 0 only when nothing failed; a fatal error decides the code, otherwise
    /// failed cells or features count as runtime failures.
    pub fn exit_code(&self) -> i32 {
        match (&self.fatal, self.failures.is_empty()) {
            (Some(e), _) => exit_code(e.kind()),
            (None, true) => 0,
            (None, false) => 3,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    ok: bool,
    failures: &'a [ManifestEntry],
}

/// Creates `output/run-YYYYMMDD-HHMMSS`, adding `-2`, `-3`, … when that name
/// is taken, and repoints `output/latest` at it.
pub fn create_run_dir(output: &Path, stamp: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(output)
        .map_err(|e| Error::Config(format!("output directory {} is not writable: {e}", output.display())))?;
    let mut n = 1;
    let dir = loop {
        let name = if n == 1 { format!("run-{stamp}") } else { format!("run-{stamp}-{n}") };
        let candidate = output.join(&name);
        match std::fs::create_dir(&candidate) {
            Ok(()) => break candidate,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => n += 1,
            Err(e) => {
                return Err(Error::Config(format!(
                    "cannot create run directory {}: {e}",
                    candidate.display()
                )))
            }
        }
    };
    let latest = output.join("latest");
    let name = dir.file_name().expect("named directory");
    if std::fs::symlink_metadata(&latest).is_ok() {
        let _ = std::fs::remove_file(&latest);
    }
    #[cfg(unix)]
    let linked = std::os::unix::fs::symlink(name, &latest);
    #[cfg(not(unix))]
    let linked = std::fs::write(&latest, name.to_string_lossy().as_bytes());
    if let Err(e) = linked {
        log::warn!("could not update {}: {e}", latest.display());
    }
    Ok(dir)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    write_rows(rows, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Validates `cfg`, then runs the selected stages. Configuration problems
/// are returned as errors before any directory is created; failures after
/// that are reported in the outcome and in `errors.json`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S").to_string();
    let dir = create_run_dir(&cfg.output, &stamp)?;
    log::info!("run directory {}", dir.display());
    write_file(&dir.join("config.resolved"), &cfg.to_resolved())?;

    let mut failures = Vec::new();
    let fatal = run_stages(cfg, &dir, &mut failures).err();
    if let Some(e) = &fatal {
        log::error!("{e}");
        failures.push(ManifestEntry {
            stage: "pipeline".into(),
            item: String::new(),
            message: e.to_string(),
        });
    }
    let manifest = Manifest {
        ok: failures.is_empty(),
        failures: &failures,
    };
    let json = serde_json::to_string_pretty(&manifest)? + "\n";
    write_file(&dir.join("errors.json"), &json)?;
    Ok(RunOutcome { dir, failures, fatal })
}

struct Inputs {
    data: Option<TreebankSet>,
    languages: Vec<String>,
    pretrained: Option<LanguageEmbeddingTable>,
    wals: Option<WalsFeatureTable>,
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let data = match (&cfg.treebanks, cfg.needs_treebanks()) {
        (Some(p), true) => Some(TreebankSet::load_dir(p, cfg.downsample, cfg.downsample_seed)?),
        _ => None,
    };
    let mut languages = Vec::new();
    if let Some(d) = &data {
        languages = if cfg.languages.is_empty() {
            d.codes().filter(|l| d.get(l, Split::Train).is_some()).map(String::from).collect()
        } else {
            cfg.languages.clone()
        };
        for l in &languages {
            d.require(l, Split::Train)?;
        }
    }
    let pretrained = cfg.embeddings.as_deref().map(load_embeddings_file).transpose()?;
    let wals = match &cfg.wals {
        Some(p) if cfg.has(Stage::Probe) || cfg.has(Stage::Heldout) => Some(load_wals_file(p)?),
        _ => None,
    };
    Ok(Inputs {
        data,
        languages,
        pretrained,
        wals,
    })
}

fn run_stages(cfg: &RunConfig, dir: &Path, failures: &mut Vec<ManifestEntry>) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    let figures = dir.join("figures");

    let snapshots = if cfg.runs_training() {
        Some(stage_train(cfg, &inputs, dir)?)
    } else if let Some(p) = &cfg.snapshots {
        Some(load_snapshot_dir(p)?)
    } else {
        None
    };

    if cfg.has(Stage::Mono) || cfg.has(Stage::Bi) {
        let data = inputs.data.as_ref().expect("treebanks loaded for grid stages");
        let setup = GridSetup {
            pretrained: inputs.pretrained.as_ref(),
            seeds: cfg.seeds.clone(),
            settings: if cfg.tagger.use_lang_emb { vec![true, false] } else { vec![false] },
            permutations: cfg.permutations,
            ..GridSetup::new(data, cfg.tagger.clone())
        };
        if cfg.has(Stage::Mono) {
            if let Some(b) = &cfg.mono_baseline {
                if !inputs.languages.contains(b) {
                    return Err(Error::Config(format!("mono_baseline `{b}` is not among the languages")));
                }
            }
            let cells = run_monolingual_grid(&setup, &inputs.languages, cfg.mono_baseline.as_deref());
            write_grid(dir, &figures, "mono", &cells, failures)?;
        }
        if cfg.has(Stage::Bi) {
            let targets: Vec<String> = cfg
                .targets
                .iter()
                .filter(|t| inputs.languages.contains(t))
                .cloned()
                .collect();
            if targets.is_empty() {
                return Err(Error::EmptyCorpus("no bilingual target has a treebank".into()));
            }
            let helpers = if cfg.helpers.is_empty() { inputs.languages.clone() } else { cfg.helpers.clone() };
            let grid = run_bilingual_grid(&setup, &targets, &helpers);
            let mut cells = Vec::new();
            for target in &targets {
                cells.extend(grid.monolingual.iter().filter(|c| &c.test_lang == target).cloned());
                cells.extend(grid.cells.iter().filter(|c| &c.test_lang == target).cloned());
            }
            write_grid(dir, &figures, "bi", &cells, failures)?;
        }
    }

    if cfg.has(Stage::Probe) || cfg.has(Stage::Heldout) {
        let snapshots = snapshots.expect("snapshots trained or loaded");
        let wals = inputs.wals.as_ref().expect("WALS loaded for probe stages");
        let sample: BTreeSet<String> = snapshots[0].languages().map(String::from).collect();
        let opts = ProbeOptions {
            folds: cfg.folds,
            lambda: cfg.lambda,
            seed: cfg.probe_seed,
            rule: PatternRule::new(cfg.delta)?,
        };
        let explicit = !cfg.features.is_empty();
        if cfg.has(Stage::Probe) {
            let features = if explicit { cfg.features.clone() } else { wals.features().map(String::from).collect() };
            let (results, skipped) = probe_features(&features, &snapshots, wals, &sample, &opts);
            let rows = probe_rows(&results);
            write_csv(&dir.join("probe.csv"), &rows)?;
            write_skipped(&dir.join("probe_skipped.csv"), "probe", &skipped, explicit, failures)?;
            if !results.is_empty() {
                let series: Vec<Trajectory> = results
                    .iter()
                    .map(|r| Trajectory {
                        feature: r.feature.clone(),
                        points: r.accuracies.iter().copied().enumerate().collect(),
                        baseline: r.baseline,
                        pattern: Some(r.pattern.to_string()),
                    })
                    .collect();
                write_file(&figures.join("probe_trajectories.svg"), &render_trajectories(&series)?)?;
            }
        }
        if cfg.has(Stage::Heldout) {
            let features = if explicit {
                cfg.features.clone()
            } else {
                wals.features_covering(&cfg.heldout).map(String::from).collect()
            };
            let (results, skipped) = heldout_features(&features, &snapshots, wals, &sample, &cfg.heldout, &opts);
            write_csv(&dir.join("heldout_uralic.csv"), &heldout_rows(&results))?;
            write_skipped(&dir.join("heldout_skipped.csv"), "heldout", &skipped, explicit, failures)?;
            if !results.is_empty() {
                let series: Vec<Trajectory> = results
                    .iter()
                    .map(|r| Trajectory {
                        feature: r.feature.clone(),
                        points: r.accuracies.iter().copied().enumerate().collect(),
                        baseline: r.baseline,
                        pattern: None,
                    })
                    .collect();
                write_file(&figures.join("heldout_uralic.svg"), &render_trajectories(&series)?)?;
            }
        }
    }
    Ok(())
}

/// Trains one model on every language with early stopping disabled and
/// saves the language table after each epoch.
fn stage_train(cfg: &RunConfig, inputs: &Inputs, dir: &Path) -> Result<Vec<LanguageEmbeddingTable>> {
    let data = inputs.data.as_ref().expect("treebanks loaded for training");
    let train_corpora: Vec<Corpus> = inputs
        .languages
        .iter()
        .map(|l| data.require(l, Split::Train).cloned())
        .collect::<Result<_>>()?;
    let dev: Vec<Corpus> = inputs
        .languages
        .iter()
        .filter_map(|l| data.get(l, Split::Dev).cloned())
        .collect();
    let config = TaggerConfig {
        use_lang_emb: true,
        max_epochs: cfg.snapshot_epochs,
        early_stop_patience: cfg.snapshot_epochs + 1,
        seed: cfg.seeds[0],
        ..cfg.tagger.clone()
    };
    let extra: Vec<String> = inputs
        .pretrained
        .as_ref()
        .map(|t| t.languages().map(String::from).collect())
        .unwrap_or_default();
    let refs: Vec<&Corpus> = train_corpora.iter().collect();
    let model = TaggerModel::for_corpora(config, &refs, &extra, inputs.pretrained.as_ref())?;
    let (best, log) = train(model, &train_corpora, &dev)?;

    let snap_dir = dir.join("snapshots");
    std::fs::create_dir_all(&snap_dir).map_err(|e| Error::io(&snap_dir, e))?;
    for s in &log.snapshots {
        s.save(&snap_dir.join(snapshot_file_name(s.epoch)))?;
    }
    let ckpt = dir.join("checkpoint");
    std::fs::create_dir_all(&ckpt).map_err(|e| Error::io(&ckpt, e))?;
    best.save(&ckpt.join("tagger.json"))?;

    let mut text = String::from("epoch,train_loss,macro_dev\n");
    for r in &log.epochs {
        writeln!(text, "{},{:?},{:?}", r.epoch, r.train_loss, r.macro_dev).unwrap();
    }
    write_file(&dir.join("train_log.csv"), &text)?;
    Ok(log.snapshots)
}

fn write_grid(
    dir: &Path,
    figures: &Path,
    name: &str,
    cells: &[TransferResult],
    failures: &mut Vec<ManifestEntry>,
) -> Result<()> {
    for c in cells {
        if let Some(e) = &c.error {
            failures.push(ManifestEntry {
                stage: name.to_string(),
                item: format!(
                    "{} -> {} ({})",
                    c.train_label(),
                    c.test_lang,
                    if c.use_lang_emb { "lang_emb" } else { "no_lang_emb" }
                ),
                message: e.clone(),
            });
        }
    }
    write_csv(&dir.join(format!("{name}_runs.csv")), &run_rows(cells))?;
    let summary = summary_rows(cells);
    write_csv(&dir.join(format!("{name}_summary.csv")), &summary)?;
    write_csv(&dir.join(format!("{name}_sentences.csv")), &sentence_rows(cells))?;
    write_file(&figures.join(format!("{name}_grid.svg")), &render_grid_bars(&summary)?)
}

/// Skipped features are always listed in the CSV; they count as failures
/// only when the user named them explicitly.
fn write_skipped(
    path: &Path,
    stage: &str,
    skipped: &[SkippedFeature],
    explicit: bool,
    failures: &mut Vec<ManifestEntry>,
) -> Result<()> {
    let mut buf = Vec::new();
    let mut w = csv::Writer::from_writer(&mut buf);
    w.write_record(["feature_id", "reason"])?;
    for s in skipped {
        w.write_record([&s.feature, &s.reason])?;
    }
    drop(w);
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    if explicit {
        failures.extend(skipped.iter().map(|s| ManifestEntry {
            stage: stage.to_string(),
            item: s.feature.clone(),
            message: s.reason.clone(),
        }));
    }
    Ok(())
}

/// Loads every configured input and summarizes it without training.
pub fn ingest_check(cfg: &RunConfig) -> Result<String> {
    let mut out = String::new();
    if let Some(p) = &cfg.treebanks {
        let set = TreebankSet::load_dir(p, cfg.downsample, cfg.downsample_seed)?;
        writeln!(out, "treebanks: {}", p.display()).unwrap();
        for lang in set.codes() {
            let mut parts = Vec::new();
            for split in [Split::Train, Split::Dev, Split::Test] {
                if let Some(c) = set.get(lang, split) {
                    parts.push(format!("{split} {} sent / {} tok", c.len(), c.num_tokens()));
                }
            }
            writeln!(out, "  {lang}: {}", parts.join(", ")).unwrap();
        }
        let trains: Vec<&Corpus> = set.codes().filter_map(|l| set.get(l, Split::Train)).collect();
        if !trains.is_empty() {
            let vocab = crate::data::build_char_vocab(&trains)?;
            let tags: BTreeSet<&str> = trains.iter().flat_map(|c| c.tokens()).map(|t| t.upos.as_str()).collect();
            writeln!(out, "  characters: {} (incl. unknown), tags: {}", vocab.len(), tags.len()).unwrap();
        }
    }
    let mut languages: Option<BTreeSet<String>> = None;
    if let Some(p) = &cfg.embeddings {
        let t = load_embeddings_file(p)?;
        writeln!(out, "embeddings: {} languages × {} dims", t.len(), t.dim()).unwrap();
        languages = Some(t.languages().map(String::from).collect());
    }
    if let Some(p) = &cfg.snapshots {
        let snaps = load_snapshot_dir(p)?;
        let epochs: Vec<String> = snaps.iter().map(|s| s.epoch.to_string()).collect();
        writeln!(out, "snapshots: epochs {}", epochs.join(",")).unwrap();
        languages.get_or_insert_with(|| snaps[0].languages().map(String::from).collect());
    }
    if let Some(p) = &cfg.wals {
        let w = load_wals_file(p)?;
        write!(out, "wals: {} features", w.len()).unwrap();
        if let Some(langs) = &languages {
            let usable = w
                .features()
                .filter(|f| crate::data::filter_feature(&w, f, langs).is_ok())
                .count();
            write!(out, ", {usable} usable on the embedded languages").unwrap();
        }
        out.push('\n');
    }
    if out.is_empty() {
        return Err(Error::Config("nothing to check: set treebanks, embeddings, snapshots or wals".into()));
    }
    Ok(out)
}
