//! Probing a feature across embedding snapshots, and the held-out protocol
//! that trains only on languages outside a target family.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{filter_feature, LanguageEmbeddingTable, WalsFeatureTable};
use crate::error::{Error, Result};
use crate::probe::dataset::{cv_probe, majority_baseline, majority_class, ProbeDataset, DEFAULT_FOLDS};
use crate::probe::logreg::{train_logreg, DEFAULT_LAMBDA};
use crate::probe::pattern::{classify_pattern, Pattern, PatternRule};

pub const URALIC: [&str; 4] = ["est", "fin", "hun", "sme"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    pub folds: usize,
    pub lambda: f64,
    pub seed: u64,
    pub rule: PatternRule,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            folds: DEFAULT_FOLDS,
            lambda: DEFAULT_LAMBDA,
            seed: 1,
            rule: PatternRule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub feature: String,
    /// cross-validated accuracy per snapshot, `accuracies[e]` for epoch `e`
    pub accuracies: Vec<f64>,
    pub baseline: f64,
    pub pattern: Pattern,
    pub languages: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedFeature {
    pub feature: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeldoutResult {
    pub feature: String,
    /// accuracy on the held-out languages per snapshot
    pub accuracies: Vec<f64>,
    /// accuracy of always predicting the training majority class
    pub baseline: f64,
}

/// Languages in `sample` covered by every snapshot. Snapshots must agree on coverage.
fn covered_sample(snapshots: &[LanguageEmbeddingTable], sample: &BTreeSet<String>) -> Result<BTreeSet<String>> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::invalid("probe", "no embedding snapshots"))?;
    let langs: BTreeSet<&str> = first.languages().collect();
    for s in &snapshots[1..] {
        if s.languages().collect::<BTreeSet<_>>() != langs {
            return Err(Error::invalid(
                "probe",
                format!("snapshot e{} covers different languages than e{}", s.epoch, first.epoch),
            ));
        }
    }
    Ok(sample.iter().filter(|l| langs.contains(l.as_str())).cloned().collect())
}

/// Cross-validated probe accuracy for `feature` at every snapshot, with the
/// majority baseline and the resulting pattern.
pub fn probe_trajectory(
    feature: &str,
    snapshots: &[LanguageEmbeddingTable],
    wals: &WalsFeatureTable,
    sample: &BTreeSet<String>,
    opts: &ProbeOptions,
) -> Result<ProbeResult> {
    let sample = covered_sample(snapshots, sample)?;
    let filtered = filter_feature(wals, feature, &sample)?;
    let mut accuracies = Vec::with_capacity(snapshots.len());
    let mut baseline = None;
    let mut languages = 0;
    for snap in snapshots {
        let d = ProbeDataset::from_table(&filtered, snap)?;
        baseline.get_or_insert_with(|| majority_baseline(&d));
        languages = d.len();
        accuracies.push(cv_probe(&d, opts.folds, opts.lambda, opts.seed)?);
    }
    let baseline = baseline.expect("at least one snapshot");
    let pattern = classify_pattern(&accuracies, baseline, opts.rule)?;
    Ok(ProbeResult {
        feature: feature.to_string(),
        accuracies,
        baseline,
        pattern,
        languages,
    })
}

/// Trains on every covered language outside `heldout` and scores the
/// `heldout` languages, once per snapshot. Every held-out language must have
/// both an embedding and a value for `feature`.
pub fn predict_heldout(
    feature: &str,
    snapshots: &[LanguageEmbeddingTable],
    wals: &WalsFeatureTable,
    sample: &BTreeSet<String>,
    heldout: &[String],
    opts: &ProbeOptions,
) -> Result<HeldoutResult> {
    let covered = covered_sample(snapshots, sample)?;
    let mut targets = Vec::new();
    for lang in heldout {
        if !snapshots[0].contains(lang) {
            return Err(Error::UnusableFeature {
                feature: feature.to_string(),
                reason: format!("no embedding for held-out language `{lang}`"),
            });
        }
        let value = wals.value(feature, lang).ok_or_else(|| Error::UnusableFeature {
            feature: feature.to_string(),
            reason: format!("no value for held-out language `{lang}`"),
        })?;
        targets.push((lang.clone(), value.to_string()));
    }
    let train_sample: BTreeSet<String> = covered.into_iter().filter(|l| !heldout.contains(l)).collect();
    let filtered = filter_feature(wals, feature, &train_sample)?;

    let mut accuracies = Vec::with_capacity(snapshots.len());
    let mut baseline = 0.0;
    for (e, snap) in snapshots.iter().enumerate() {
        let d = ProbeDataset::from_table(&filtered, snap)?;
        if e == 0 {
            let (modal, _) = majority_class(&d.class_counts());
            baseline = targets.iter().filter(|(_, v)| *v == modal).count() as f64 / targets.len() as f64;
        }
        let x: Vec<Vec<f64>> = d.rows().iter().map(|r| r.vector.clone()).collect();
        let y: Vec<String> = d.rows().iter().map(|r| r.label.clone()).collect();
        let model = train_logreg(&x, &y, opts.lambda)?;
        let hits = targets
            .iter()
            .filter(|(lang, v)| model.predict(snap.get(lang).expect("checked above")) == v.as_str())
            .count();
        accuracies.push(hits as f64 / targets.len() as f64);
    }
    Ok(HeldoutResult {
        feature: feature.to_string(),
        accuracies,
        baseline,
    })
}

/// [`predict_heldout`] with the four Uralic languages held out.
pub fn predict_heldout_uralic(
    feature: &str,
    snapshots: &[LanguageEmbeddingTable],
    wals: &WalsFeatureTable,
    sample: &BTreeSet<String>,
    opts: &ProbeOptions,
) -> Result<HeldoutResult> {
    let uralic: Vec<String> = URALIC.iter().map(|s| s.to_string()).collect();
    predict_heldout(feature, snapshots, wals, sample, &uralic, opts)
}

fn run_features<T: Send>(
    features: &[String],
    f: impl Fn(&str) -> Result<T> + Sync,
) -> (Vec<T>, Vec<SkippedFeature>) {
    let mut sorted = features.to_vec();
    sorted.sort();
    sorted.dedup();
    let outcomes: Vec<(String, Result<T>)> = sorted.into_par_iter().map(|feat| {
        let r = f(&feat);
        (feat, r)
    }).collect();
    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    for (feature, r) in outcomes {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                log::info!("feature {feature} skipped: {e}");
                skipped.push(SkippedFeature {
                    feature,
                    reason: e.to_string(),
                });
            }
        }
    }
    (ok, skipped)
}

/// Probes every feature in parallel; results and skips come back sorted by feature id.
pub fn probe_features(
    features: &[String],
    snapshots: &[LanguageEmbeddingTable],
    wals: &WalsFeatureTable,
    sample: &BTreeSet<String>,
    opts: &ProbeOptions,
) -> (Vec<ProbeResult>, Vec<SkippedFeature>) {
    run_features(features, |f| probe_trajectory(f, snapshots, wals, sample, opts))
}

pub fn heldout_features(
    features: &[String],
    snapshots: &[LanguageEmbeddingTable],
    wals: &WalsFeatureTable,
    sample: &BTreeSet<String>,
    heldout: &[String],
    opts: &ProbeOptions,
) -> (Vec<HeldoutResult>, Vec<SkippedFeature>) {
    run_features(features, |f| predict_heldout(f, snapshots, wals, sample, heldout, opts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub feature_id: String,
    pub epoch: usize,
    pub cv_accuracy: f64,
    pub baseline: f64,
    pub pattern: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldoutRow {
    pub feature_id: String,
    pub epoch: usize,
    pub uralic_accuracy: f64,
    pub baseline: f64,
}

pub fn probe_rows(results: &[ProbeResult]) -> Vec<ProbeRow> {
    results
        .iter()
        .flat_map(|r| {
            r.accuracies.iter().enumerate().map(move |(e, a)| ProbeRow {
                feature_id: r.feature.clone(),
                epoch: e,
                cv_accuracy: *a,
                baseline: r.baseline,
                pattern: r.pattern.to_string(),
            })
        })
        .collect()
}

pub fn heldout_rows(results: &[HeldoutResult]) -> Vec<HeldoutRow> {
    results
        .iter()
        .flat_map(|r| {
            r.accuracies.iter().enumerate().map(move |(e, a)| HeldoutRow {
                feature_id: r.feature.clone(),
                epoch: e,
                uralic_accuracy: *a,
                baseline: r.baseline,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(epoch: usize, rows: &[(&str, Vec<f64>)]) -> LanguageEmbeddingTable {
        let mut t = LanguageEmbeddingTable::new(epoch, rows[0].1.len());
        for (l, v) in rows {
            t.insert(*l, v.clone()).unwrap();
        }
        t
    }

    #[test]
    fn mismatched_snapshot_coverage_rejected() {
        let a = table(0, &[("x", vec![0.0]), ("y", vec![1.0])]);
        let b = table(1, &[("x", vec![0.0]), ("z", vec![1.0])]);
        let sample: BTreeSet<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        assert!(covered_sample(&[a, b], &sample).is_err());
    }

    #[test]
    fn missing_heldout_value_is_skipped() {
        let langs = ["est", "fin", "hun", "sme", "aaa", "bbb", "ccc", "ddd"];
        let rows: Vec<(&str, Vec<f64>)> = langs.iter().enumerate().map(|(i, l)| (*l, vec![i as f64])).collect();
        let snaps = vec![table(0, &rows)];
        let mut wals = WalsFeatureTable::new();
        for (i, l) in langs.iter().enumerate() {
            if *l != "sme" {
                wals.insert(l, "1A", if i % 2 == 0 { "a" } else { "b" }).unwrap();
            }
        }
        let sample: BTreeSet<String> = langs.iter().map(|s| s.to_string()).collect();
        let (ok, skipped) = heldout_features(
            &["1A".to_string(), "9Z".to_string()],
            &snaps,
            &wals,
            &sample,
            &URALIC.map(String::from),
            &ProbeOptions::default(),
        );
        assert!(ok.is_empty());
        assert_eq!(skipped.len(), 2);
        assert!(skipped[0].reason.contains("sme"));
    }
}
