use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{FilteredFeature, LanguageEmbeddingTable};
use crate::error::{Error, Result};
use crate::probe::logreg::train_logreg;

pub const DEFAULT_FOLDS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub language: String,
    pub vector: Vec<f64>,
    pub label: String,
}

/// Rows for one feature at one epoch.
///
/// Invariants: language codes are unique, all vectors share one dimension,
/// and there are at least two classes with at least two rows each.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeDataset {
    pub feature: String,
    pub epoch: usize,
    rows: Vec<ProbeRow>,
}

impl ProbeDataset {
    pub fn new(feature: impl Into<String>, epoch: usize, rows: Vec<ProbeRow>) -> Result<Self> {
        let feature = feature.into();
        let unusable = |reason: String| Error::UnusableFeature {
            feature: feature.clone(),
            reason,
        };
        let mut seen = BTreeSet::new();
        for r in &rows {
            if !seen.insert(r.language.as_str()) {
                return Err(unusable(format!("language `{}` appears twice", r.language)));
            }
        }
        if let Some(first) = rows.first() {
            let d = first.vector.len();
            if let Some(bad) = rows.iter().find(|r| r.vector.len() != d) {
                return Err(Error::Shape {
                    op: "ProbeDataset::new",
                    operand: "vector",
                    expected: vec![d],
                    found: vec![bad.vector.len()],
                });
            }
        }
        let counts = class_counts(&rows);
        if counts.len() < 2 || counts.values().any(|n| *n < 2) {
            return Err(unusable(format!("class sizes {counts:?}; need ≥2 classes of ≥2 rows")));
        }
        Ok(ProbeDataset { feature, epoch, rows })
    }

    /// Joins a filtered feature with one embedding table. Languages without an
    /// embedding are dropped and classes that fall below two rows go with them.
    pub fn from_table(feature: &FilteredFeature, table: &LanguageEmbeddingTable) -> Result<Self> {
        let mut rows: Vec<ProbeRow> = feature
            .assignment
            .iter()
            .filter_map(|(lang, class)| {
                table.get(lang).map(|v| ProbeRow {
                    language: lang.clone(),
                    vector: v.to_vec(),
                    label: class.clone(),
                })
            })
            .collect();
        let dropped = feature.assignment.len() - rows.len();
        if dropped > 0 {
            log::info!(
                "{}: {dropped} language(s) with a value but no embedding dropped",
                feature.feature
            );
        }
        let counts = class_counts(&rows);
        rows.retain(|r| counts[&r.label] >= 2);
        ProbeDataset::new(feature.feature.clone(), table.epoch, rows)
    }

    pub fn rows(&self) -> &[ProbeRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn class_counts(&self) -> BTreeMap<String, usize> {
        class_counts(&self.rows)
    }
}

fn class_counts(rows: &[ProbeRow]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for r in rows {
        *m.entry(r.label.clone()).or_insert(0) += 1;
    }
    m
}

/// Most frequent class and its share of the rows; ties go to the smallest label.
pub fn majority_class(counts: &BTreeMap<String, usize>) -> (String, f64) {
    let total: usize = counts.values().sum();
    let mut best: Option<(&str, usize)> = None;
    for (c, n) in counts {
        if best.is_none_or(|(_, b)| *n > b) {
            best = Some((c, *n));
        }
    }
    let (c, n) = best.expect("non-empty counts");
    (c.to_string(), n as f64 / total as f64)
}

pub fn majority_baseline(d: &ProbeDataset) -> f64 {
    majority_class(&d.class_counts()).1
}

/// Stratified fold index for every row of `d`, in row order.
///
/// Within each class (in label order) rows are sorted by language code,
/// shuffled with a generator seeded by `seed`, then dealt round-robin,
/// continuing the deal where the previous class stopped. The number of
/// folds is `min(folds, smallest class size)`.
pub fn stratified_folds(d: &ProbeDataset, folds: usize, seed: u64) -> Result<(usize, Vec<usize>)> {
    if folds < 2 {
        return Err(Error::invalid("cv_probe", format!("need at least 2 folds, got {folds}")));
    }
    let counts = d.class_counts();
    let k = folds.min(*counts.values().min().expect("≥2 classes"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; d.rows.len()];
    let mut next = 0;
    for class in counts.keys() {
        let mut members: Vec<usize> = (0..d.rows.len()).filter(|&i| d.rows[i].label == *class).collect();
        members.sort_by(|&a, &b| d.rows[a].language.cmp(&d.rows[b].language));
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next % k;
            next += 1;
        }
    }
    Ok((k, assignment))
}

/// Mean held-out accuracy over stratified folds.
pub fn cv_probe(d: &ProbeDataset, folds: usize, lambda: f64, seed: u64) -> Result<f64> {
    let (k, assignment) = stratified_folds(d, folds, seed)?;
    let mut total = 0.0;
    for fold in 0..k {
        let (mut xt, mut yt, mut xh, mut yh) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (r, &f) in d.rows.iter().zip(&assignment) {
            if f == fold {
                xh.push(r.vector.clone());
                yh.push(r.label.clone());
            } else {
                xt.push(r.vector.clone());
                yt.push(r.label.clone());
            }
        }
        let model = train_logreg(&xt, &yt, lambda)?;
        total += model.accuracy(&xh, &yh);
    }
    Ok(total / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(lang: &str, v: Vec<f64>, label: &str) -> ProbeRow {
        ProbeRow {
            language: lang.into(),
            vector: v,
            label: label.into(),
        }
    }

    fn counts(pairs: &[(&str, usize)]) -> BTreeMap<String, usize> {
        pairs.iter().map(|(c, n)| (c.to_string(), *n)).collect()
    }

    #[test]
    fn baseline_majority() {
        let (c, a) = majority_class(&counts(&[("A", 6), ("B", 3)]));
        assert_eq!(c, "A");
        assert!((a - 6.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn baseline_tie_goes_to_smallest_label() {
        assert_eq!(majority_class(&counts(&[("B", 5), ("A", 5)])), ("A".to_string(), 0.5));
    }

    #[test]
    fn folds_hold_one_per_class() {
        let rows = (0..6)
            .map(|i| row(&format!("l{i}"), vec![i as f64], if i < 3 { "x" } else { "y" }))
            .collect();
        let d = ProbeDataset::new("f", 0, rows).unwrap();
        let (k, a) = stratified_folds(&d, 3, 9).unwrap();
        assert_eq!(k, 3);
        for fold in 0..3 {
            for class in ["x", "y"] {
                let n = d.rows().iter().zip(&a).filter(|(r, f)| **f == fold && r.label == class).count();
                assert_eq!(n, 1);
            }
        }
    }

    #[test]
    fn folds_shrink_to_smallest_class() {
        let rows = vec![
            row("a", vec![0.0], "x"),
            row("b", vec![1.0], "x"),
            row("c", vec![2.0], "y"),
            row("d", vec![3.0], "y"),
            row("e", vec![4.0], "y"),
        ];
        let d = ProbeDataset::new("f", 0, rows).unwrap();
        assert_eq!(stratified_folds(&d, 3, 1).unwrap().0, 2);
    }

    #[test]
    fn rejects_degenerate_datasets() {
        let one_class = vec![row("a", vec![0.0], "x"), row("b", vec![1.0], "x")];
        assert!(ProbeDataset::new("f", 0, one_class).is_err());
        let singleton = vec![row("a", vec![0.0], "x"), row("b", vec![1.0], "x"), row("c", vec![1.0], "y")];
        assert!(ProbeDataset::new("f", 0, singleton).is_err());
        let dup = vec![
            row("a", vec![0.0], "x"),
            row("a", vec![1.0], "x"),
            row("c", vec![1.0], "y"),
            row("d", vec![1.0], "y"),
        ];
        assert!(ProbeDataset::new("f", 0, dup).is_err());
    }

    #[test]
    fn one_coordinate_signal_is_found() {
        let rows = (0..12)
            .map(|i| {
                let pos = i % 2 == 0;
                row(&format!("l{i:02}"), vec![if pos { 1.0 } else { -1.0 }, (i as f64).sin()], if pos { "p" } else { "n" })
            })
            .collect();
        let d = ProbeDataset::new("f", 0, rows).unwrap();
        assert!(cv_probe(&d, 3, 1e-2, 4).unwrap() >= 0.9);
    }
}
