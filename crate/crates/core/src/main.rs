use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use langvec::report::{
    ingest_check, render_figure, run_pipeline, write_fixture, FigureKind, FigureSpec, FixtureOptions, RunConfig,
    Stage,
};
use langvec::report::pipeline::exit_code;
use langvec::{Error, Result};

/// Language-embedding PoS tagging, transfer grids and typology probes.
#[derive(Debug, Parser)]
#[command(name = "langvec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    overrides: Overrides,

    /// -v for progress, -vv for per-epoch detail
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load and summarize the configured inputs without training
    IngestCheck,
    /// Train on all languages and save language-embedding snapshots
    Train,
    /// Monolingual transfer grid
    GridMono,
    /// Bilingual transfer grid
    GridBi,
    /// Probe WALS features across embedding snapshots
    Probe,
    /// Predict features of the held-out languages from all others
    HeldoutUralic,
    /// Render a figure from a CSV written by a run
    Render {
        #[arg(long, value_parser = parse_kind)]
        kind: FigureKind,
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "to")]
        to: PathBuf,
    },
    /// Every stage in order
    All,
    /// Write the synthetic fixture (treebanks, embeddings, WALS, config)
    MakeFixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = FixtureOptions::default().train)]
        train: usize,
        #[arg(long, default_value_t = FixtureOptions::default().dev)]
        dev: usize,
        #[arg(long, default_value_t = FixtureOptions::default().test)]
        test: usize,
        #[arg(long, default_value_t = FixtureOptions::default().seed)]
        seed: u64,
    },
}

fn parse_kind(s: &str) -> std::result::Result<FigureKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Flags mirror configuration keys and override the config file.
#[derive(Debug, Args)]
struct Overrides {
    /// flat `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    treebanks: Option<String>,
    #[arg(long, global = true)]
    embeddings: Option<String>,
    #[arg(long, global = true)]
    wals: Option<String>,
    #[arg(long, global = true)]
    snapshots: Option<String>,
    #[arg(long, global = true)]
    output: Option<String>,
    #[arg(long, global = true)]
    languages: Option<String>,
    #[arg(long, global = true)]
    targets: Option<String>,
    #[arg(long, global = true)]
    helpers: Option<String>,
    #[arg(long, global = true)]
    mono_baseline: Option<String>,
    #[arg(long, global = true)]
    heldout: Option<String>,
    #[arg(long, global = true)]
    features: Option<String>,
    #[arg(long, global = true)]
    char_emb_dim: Option<String>,
    #[arg(long, global = true)]
    char_lstm_hidden: Option<String>,
    #[arg(long, global = true)]
    word_lstm_hidden: Option<String>,
    #[arg(long, global = true)]
    word_lstm_layers: Option<String>,
    #[arg(long, global = true)]
    lang_emb_dim: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<String>,
    #[arg(long, global = true)]
    patience: Option<String>,
    /// train without language embeddings
    #[arg(long, global = true)]
    no_lang_emb: bool,
    #[arg(long, global = true)]
    learning_rate: Option<String>,
    /// comma-separated training seeds
    #[arg(long, global = true)]
    seed_list: Option<String>,
    /// training-sentence cap per language
    #[arg(long, global = true)]
    downsample: Option<String>,
    #[arg(long, global = true)]
    downsample_seed: Option<String>,
    #[arg(long, global = true)]
    snapshot_epochs: Option<String>,
    #[arg(long, global = true)]
    permutations: Option<String>,
    /// pattern margin over the majority baseline
    #[arg(long, global = true)]
    delta: Option<String>,
    /// L2 strength of the probe
    #[arg(long, global = true)]
    lambda: Option<String>,
    #[arg(long, global = true)]
    folds: Option<String>,
    #[arg(long, global = true)]
    probe_seed: Option<String>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        let pairs = [
            ("treebanks", &self.treebanks),
            ("embeddings", &self.embeddings),
            ("wals", &self.wals),
            ("snapshots", &self.snapshots),
            ("output", &self.output),
            ("languages", &self.languages),
            ("targets", &self.targets),
            ("helpers", &self.helpers),
            ("mono_baseline", &self.mono_baseline),
            ("heldout", &self.heldout),
            ("features", &self.features),
            ("char_emb_dim", &self.char_emb_dim),
            ("char_lstm_hidden", &self.char_lstm_hidden),
            ("word_lstm_hidden", &self.word_lstm_hidden),
            ("word_lstm_layers", &self.word_lstm_layers),
            ("lang_emb_dim", &self.lang_emb_dim),
            ("epochs", &self.epochs),
            ("patience", &self.patience),
            ("learning_rate", &self.learning_rate),
            ("seed_list", &self.seed_list),
            ("downsample", &self.downsample),
            ("downsample_seed", &self.downsample_seed),
            ("snapshot_epochs", &self.snapshot_epochs),
            ("permutations", &self.permutations),
            ("delta", &self.delta),
            ("lambda", &self.lambda),
            ("folds", &self.folds),
            ("probe_seed", &self.probe_seed),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v, Path::new(""))?;
            }
        }
        if self.no_lang_emb {
            cfg.tagger.use_lang_emb = false;
        }
        Ok(())
    }

    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        self.apply(&mut cfg)?;
        Ok(cfg)
    }
}

fn stages_for(command: &Command) -> Option<Vec<Stage>> {
    Some(match command {
        Command::Train => vec![Stage::Train],
        Command::GridMono => vec![Stage::Mono],
        Command::GridBi => vec![Stage::Bi],
        Command::Probe => vec![Stage::Probe],
        Command::HeldoutUralic => vec![Stage::Heldout],
        Command::All => Stage::ALL.to_vec(),
        _ => return None,
    })
}

fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::IngestCheck => {
            print!("{}", ingest_check(&cli.overrides.resolve()?)?);
            Ok(0)
        }
        Command::Render { kind, input, to } => {
            render_figure(&FigureSpec {
                kind: *kind,
                source: input.clone(),
                output: to.clone(),
            })?;
            println!("{}", to.display());
            Ok(0)
        }
        Command::MakeFixture {
            out,
            train,
            dev,
            test,
            seed,
        } => {
            let paths = write_fixture(
                out,
                &FixtureOptions {
                    train: *train,
                    dev: *dev,
                    test: *test,
                    seed: *seed,
                },
            )?;
            println!("{}", paths.config.display());
            Ok(0)
        }
        other => {
            let mut cfg = cli.overrides.resolve()?;
            cfg.stages = stages_for(other).expect("pipeline command");
            let outcome = run_pipeline(&cfg)?;
            println!("{}", outcome.dir.display());
            for f in &outcome.failures {
                eprintln!("failed [{}] {}: {}", f.stage, f.item, f.message);
            }
            Ok(outcome.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.kind())
        }
    };
    ExitCode::from(code as u8)
}
