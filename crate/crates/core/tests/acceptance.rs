//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use langvec::data::{downsample, Corpus, Sentence, Split, Token, TreebankSet, DEFAULT_SENTENCE_CAP};
use langvec::nn::{AdamConfig, AdamState, Graph, ParamStore, Tensor};
use langvec::probe::{classify_pattern, cv_probe, majority_baseline, Pattern, PatternRule, ProbeDataset, ProbeRow};
use langvec::synthetic::{SyntheticLanguage, GREEK};
use langvec::tagger::{train, TaggerConfig, TaggerModel};
use langvec::transfer::{run_bilingual_grid, significance_test, GridSetup, TransferResult};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;
type Criterion = (usize, &'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    check(elapsed < limit, format!("{detail}, {:.1}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs()))
}

// 1. analytic gradients of the full tagger loss against central differences
fn gradient_integrity() -> Outcome {
    let start = Instant::now();
    let cfg = TaggerConfig {
        char_emb_dim: 8,
        char_lstm_hidden: 8,
        word_lstm_hidden: 8,
        word_lstm_layers: 2,
        lang_emb_dim: 8,
        ..TaggerConfig::default()
    };
    let pairs = [("aaa", [("kato", "NOUN"), ("mesi", "VERB")]), ("bbb", [("ruvo", "ADJ"), ("kato", "VERB")])];
    let corpora: Vec<Corpus> = pairs
        .iter()
        .map(|(lang, toks)| {
            let s = Sentence::new(toks.iter().map(|(f, t)| Token::new(*f, *t)).collect());
            Corpus::new(*lang, Split::Train, vec![s])
        })
        .collect();
    let refs: Vec<&Corpus> = corpora.iter().collect();
    let mut model = TaggerModel::for_corpora(cfg, &refs, &[], None).map_err(|e| e.to_string())?;

    // gradient of the summed loss over both sentences
    let ids: Vec<_> = model.store().ids().collect();
    let mut analytic: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for c in &corpora {
        model.loss_and_gradients(&c.sentences[0], &c.language).map_err(|e| e.to_string())?;
        for (k, id) in ids.iter().enumerate() {
            let g = model.store().get(*id).grad().expect("trainable").to_vec();
            let acc = analytic.entry(k).or_insert_with(|| vec![0.0; g.len()]);
            for (a, v) in acc.iter_mut().zip(g) {
                *a += v;
            }
        }
    }
    let total_loss = |m: &TaggerModel| -> f64 { corpora.iter().map(|c| m.loss(&c.sentences[0], &c.language).unwrap()).sum() };

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-4;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let mut nonzero = 0;
    // every tensor is sampled; large tensors contribute more entries
    for (k, id) in ids.iter().enumerate() {
        let n = model.store().get(*id).len();
        let draws = (n / 20).clamp(3, 12);
        for _ in 0..draws {
            // prefer entries the loss depends on; char rows of unused characters are identically zero
            let live: Vec<usize> = (0..n).filter(|&i| analytic[&k][i] != 0.0).collect();
            let i = if live.is_empty() { rng.random_range(0..n) } else { live[rng.random_range(0..live.len())] };
            let orig = model.store().get(*id).values()[i];
            model.store_mut().get_mut(*id).values_mut()[i] = orig + h;
            let plus = total_loss(&model);
            model.store_mut().get_mut(*id).values_mut()[i] = orig - h;
            let minus = total_loss(&model);
            model.store_mut().get_mut(*id).values_mut()[i] = orig;
            let fd = (plus - minus) / (2.0 * h);
            let an = analytic[&k][i];
            let scale = an.abs().max(fd.abs());
            let rel = if scale < 1e-7 { 0.0 } else { (an - fd).abs() / scale };
            worst = worst.max(rel);
            checked += 1;
            if an != 0.0 {
                nonzero += 1;
            }
        }
    }
    let detail = format!("{checked} parameters ({nonzero} non-zero), max relative error {worst:.2e}");
    check(checked >= 100 && worst <= 1e-3, detail.clone())?;
    within(start.elapsed(), Duration::from_secs(60), detail)
}

// 2. Adam against a scalar implementation written from the update rule
fn optimizer_oracle() -> Outcome {
    let cfg = AdamConfig::default();
    let (mut w, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
    let mut store = ParamStore::new();
    let id = store.add("w", Tensor::vector(vec![0.0]));
    let mut adam = AdamState::new(cfg, &store);
    let mut worst: f64 = 0.0;
    for t in 1..=100 {
        let g = 2.0 * (w - 3.0);
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
        let mh = m / (1.0 - cfg.beta1.powi(t));
        let vh = v / (1.0 - cfg.beta2.powi(t));
        w -= cfg.lr * mh / (vh.sqrt() + cfg.epsilon);

        let mut graph = Graph::new();
        let x = graph.param(&store, id);
        let c = graph.vector(vec![-3.0]);
        let d = graph.add(x, c).map_err(|e| e.to_string())?;
        let f = graph.dot(d, d).map_err(|e| e.to_string())?;
        store.zero_grad();
        graph.backward(f).map_err(|e| e.to_string())?;
        graph.accumulate_param_grads(&mut store);
        adam.step(&mut store).map_err(|e| e.to_string())?;
        worst = worst.max((store.get(id).values()[0] - w).abs());
    }
    check(worst <= 1e-10, format!("100 steps, max deviation {worst:.2e}"))
}

// 3. a default-size model memorizes five sentences
fn overfit_sanity() -> Outcome {
    let start = Instant::now();
    let corpus = SyntheticLanguage::new("fin").corpus(Split::Train, 5, 3);
    let cfg = TaggerConfig {
        // the whole budget of ten epochs is available
        early_stop_patience: 10,
        ..TaggerConfig::default()
    };
    let model = TaggerModel::for_corpora(cfg, &[&corpus], &[], None).map_err(|e| e.to_string())?;
    let (best, log) = train(model, std::slice::from_ref(&corpus), std::slice::from_ref(&corpus)).map_err(|e| e.to_string())?;
    let acc = best.evaluate(&corpus).map_err(|e| e.to_string())?;
    let first_perfect = log.epochs.iter().find(|r| r.macro_dev >= 1.0).map(|r| r.epoch);
    check(
        acc == 1.0 && log.epochs.len() <= 10,
        format!(
            "training accuracy {acc:.3}, first perfect epoch {first_perfect:?}, {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn pair_data(a: &SyntheticLanguage, b: &SyntheticLanguage) -> TreebankSet {
    let mut set = TreebankSet::new();
    for (i, lang) in [a, b].into_iter().enumerate() {
        let seed = 100 + i as u64;
        set.insert(lang.corpus(Split::Train, 200, seed));
        set.insert(lang.corpus(Split::Dev, 50, seed));
        set.insert(lang.corpus(Split::Test, 200, seed));
    }
    set
}

fn mean_of(cells: &[TransferResult], test: &str, train_len: usize, emb: bool) -> f64 {
    cells
        .iter()
        .find(|c| c.test_lang == test && c.train_langs.len() == train_len && c.use_lang_emb == emb)
        .and_then(|c| c.mean)
        .unwrap_or(f64::NAN)
}

// 4. twins benefit from each other; conflicting rules need the language embedding
fn twin_transfer() -> Outcome {
    let start = Instant::now();
    let cfg = TaggerConfig {
        char_emb_dim: 16,
        char_lstm_hidden: 16,
        word_lstm_hidden: 16,
        word_lstm_layers: 1,
        lang_emb_dim: 8,
        ..TaggerConfig::default()
    };
    let langs = |a: &str, b: &str| vec![a.to_string(), b.to_string()];

    let twins = pair_data(&SyntheticLanguage::new("lat"), &SyntheticLanguage::new("grk").with_alphabet(GREEK));
    let mut setup = GridSetup::new(&twins, cfg.clone());
    setup.seeds = vec![1];
    setup.settings = vec![true];
    setup.permutations = 1000;
    let g = run_bilingual_grid(&setup, &langs("lat", "grk"), &langs("lat", "grk"));
    let mut all: Vec<TransferResult> = g.cells.clone();
    all.extend(g.monolingual.clone());
    let mut twin_ok = true;
    let mut parts = Vec::new();
    for t in ["lat", "grk"] {
        let (mono, bi) = (mean_of(&all, t, 1, true), mean_of(&all, t, 2, true));
        twin_ok &= bi >= mono - 0.01;
        parts.push(format!("{t} mono {:.1} bi {:.1}", 100.0 * mono, 100.0 * bi));
    }

    let conflict = pair_data(
        &SyntheticLanguage::new("cfa"),
        &SyntheticLanguage::new("cfb").with_conflicting_tags(),
    );
    let mut setup = GridSetup::new(&conflict, cfg);
    setup.seeds = vec![1];
    setup.settings = vec![true, false];
    setup.permutations = 1000;
    let g = run_bilingual_grid(&setup, &langs("cfa", "cfb"), &langs("cfa", "cfb"));
    let with = (mean_of(&g.cells, "cfa", 2, true) + mean_of(&g.cells, "cfb", 2, true)) / 2.0;
    let without = (mean_of(&g.cells, "cfa", 2, false) + mean_of(&g.cells, "cfb", 2, false)) / 2.0;
    let gap = 100.0 * (with - without);
    parts.push(format!("conflict pair with {:.1} without {:.1} (gap {gap:.1})", 100.0 * with, 100.0 * without));

    let detail = parts.join("; ");
    check(twin_ok && gap >= 5.0, detail.clone())?;
    within(start.elapsed(), Duration::from_secs(300), detail)
}

fn planted_rows(rng: &mut ChaCha8Rng) -> Vec<ProbeRow> {
    let noise = Normal::new(0.0, 0.3).unwrap();
    (0..30)
        .map(|i| {
            let mut v: Vec<f64> = (0..64).map(|_| noise.sample(rng)).collect();
            let class = i % 2;
            let s = if class == 0 { 0.8 } else { -0.8 };
            v[7] += s;
            v[40] -= s;
            ProbeRow {
                language: format!("l{i:02}"),
                vector: v,
                label: ["A", "B"][class].to_string(),
            }
        })
        .collect()
}

// 5. planted signal is found, shuffled labels sit at the baseline
fn probe_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let rows = planted_rows(&mut rng);
    let d = ProbeDataset::new("planted", 0, rows.clone()).map_err(|e| e.to_string())?;
    let acc = cv_probe(&d, 3, 1e-2, 1).map_err(|e| e.to_string())?;
    let (mut null, mut base) = (0.0, 0.0);
    for _ in 0..20 {
        let mut labels: Vec<String> = rows.iter().map(|r| r.label.clone()).collect();
        labels.shuffle(&mut rng);
        let shuffled = rows.iter().zip(labels).map(|(r, label)| ProbeRow { label, ..r.clone() }).collect();
        let d = ProbeDataset::new("shuffled", 0, shuffled).map_err(|e| e.to_string())?;
        null += cv_probe(&d, 3, 1e-2, 1).map_err(|e| e.to_string())? / 20.0;
        base += majority_baseline(&d) / 20.0;
    }
    check(
        acc >= 0.9 && (null - base).abs() <= 0.15,
        format!("planted CV {acc:.3}; shuffled mean {null:.3} vs baseline {base:.3}"),
    )
}

// 6. the four canonical trajectories
fn pattern_taxonomy() -> Outcome {
    let rule = PatternRule::default();
    let base = 0.5;
    let cases = [
        ([0.9, 0.85, 0.9], Pattern::PreEncoded),
        ([0.5, 0.7, 0.9], Pattern::EncodedByFineTuning),
        ([0.5, 0.52, 0.45], Pattern::NotPreEncoded),
        ([0.9, 0.7, 0.5], Pattern::LostByFineTuning),
    ];
    let mut seen = Vec::new();
    for (traj, want) in &cases {
        let got = classify_pattern(traj, base, rule).map_err(|e| e.to_string())?;
        if got != *want {
            return Err(format!("{traj:?} gave {got}, expected {want}"));
        }
        seen.push(got.to_string());
    }
    check(seen.len() == 4, seen.join(" | "))
}

fn numbered(n: usize) -> Corpus {
    let sentences = (0..n).map(|i| Sentence::new(vec![Token::new(format!("w{i}"), "X")])).collect();
    Corpus::new("xx", Split::Train, sentences)
}

// 7. down-sampling cap
fn downsampling_contract() -> Outcome {
    let mut parts = Vec::new();
    for n in [1, 1499, 1500, 1501, 1600, 4000] {
        let c = numbered(n);
        let d = downsample(&c, DEFAULT_SENTENCE_CAP, 1);
        let ok = if n > DEFAULT_SENTENCE_CAP { d.len() == DEFAULT_SENTENCE_CAP } else { d == c };
        if !ok {
            return Err(format!("{n} sentences gave {}", d.len()));
        }
        parts.push(format!("{n}->{}", d.len()));
    }
    // the same contract through the treebank loader; dev is never capped
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut set = TreebankSet::new();
    set.insert(numbered(1600));
    let mut dev = numbered(1600);
    dev.split = Split::Dev;
    set.insert(dev);
    set.write_dir(tmp.path()).map_err(|e| e.to_string())?;
    let loaded = TreebankSet::load_dir(tmp.path(), DEFAULT_SENTENCE_CAP, 1).map_err(|e| e.to_string())?;
    let (tr, dv) = (loaded.get("xx", Split::Train).unwrap().len(), loaded.get("xx", Split::Dev).unwrap().len());
    parts.push(format!("loader train {tr} dev {dv}"));
    check(tr == 1500 && dv == 1600, parts.join(", "))
}

/// Exhaustive two-sided sign-flip p-value.
fn enumerated_p(d: &[f64]) -> f64 {
    let observed = d.iter().sum::<f64>().abs();
    let n = d.len();
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).map(|i| if mask & (1 << i) != 0 { -d[i] } else { d[i] }).sum();
        if s.abs() >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / (1u64 << n) as f64
}

fn sentence_scores(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let total = rng.random_range(2..15);
            (0..total).filter(|_| rng.random::<f64>() < 0.75).count() as f64 / total as f64
        })
        .collect()
}

// 8. randomization test calibration
fn significance_calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let same = sentence_scores(&mut rng, 50);
    let p_same = significance_test(&same, &same, 10_000, 1).map_err(|e| e.to_string())?;

    let a = sentence_scores(&mut rng, 20);
    let b: Vec<f64> = a.iter().map(|x| x - rng.random_range(-0.25..0.3)).collect();
    let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let want = enumerated_p(&d);
    let got = significance_test(&a, &b, 10_000, 1).map_err(|e| e.to_string())?;

    let mut rejected = 0;
    for trial in 0..100 {
        let x = sentence_scores(&mut rng, 200);
        let y = sentence_scores(&mut rng, 200);
        if significance_test(&x, &y, 10_000, trial).map_err(|e| e.to_string())? < 0.05 {
            rejected += 1;
        }
    }
    check(
        p_same == 1.0 && (got - want).abs() <= 1e-12 && rejected <= 10,
        format!("identical p={p_same}; 20 pairs p={got:.6} vs enumerated {want:.6}; {rejected}/100 null rejections"),
    )
}

fn artifacts(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv" || x == "svg") {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

// 9. two full runs on the fixture agree byte for byte
fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_langvec");
    let fx = tmp.path().join("fixture");
    let st = Command::new(bin).args(["make-fixture", "--out"]).arg(&fx).status().map_err(|e| e.to_string())?;
    check(st.success(), "make-fixture failed".into())?;
    let mut dirs = Vec::new();
    for _ in 0..2 {
        let out = Command::new(bin)
            .args(["all", "--config"])
            .arg(fx.join("fixture.conf"))
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("`all` exited with {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
        }
        dirs.push(PathBuf::from(String::from_utf8_lossy(&out.stdout).trim().to_string()));
    }
    let (a, b) = (artifacts(&dirs[0]), artifacts(&dirs[1]));
    let differing: Vec<String> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    check(
        dirs[0] != dirs[1] && a.len() >= 12 && differing.is_empty(),
        format!("{} CSV/SVG files compared, differing: {differing:?}", a.len()),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "gradient integrity", gradient_integrity),
        (2, "optimizer oracle", optimizer_oracle),
        (3, "overfit sanity", overfit_sanity),
        (4, "twin-language transfer", twin_transfer),
        (5, "probe planted signal", probe_oracle),
        (6, "pattern taxonomy", pattern_taxonomy),
        (7, "down-sampling contract", downsampling_contract),
        (8, "significance calibration", significance_calibration),
        (9, "determinism", determinism),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = Vec::new();
    for (n, name, f) in criteria {
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS {name}: {detail}"),
            Err(detail) => {
                println!("criterion {n}: FAIL {name}: {detail}");
                failed.push(n);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
