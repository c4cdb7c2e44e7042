//! WALS feature tables from a normalized `language_code,feature_id,value` CSV.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WalsFeatureTable {
    features: BTreeMap<String, BTreeMap<String, String>>,
}

#[derive(Debug, Deserialize)]
struct Row {
    language_code: String,
    feature_id: String,
    value: String,
}

impl WalsFeatureTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, language: &str, feature: &str, value: &str) -> Result<()> {
        let by_lang = self.features.entry(feature.to_string()).or_default();
        match by_lang.get(language) {
            Some(prev) if prev != value => Err(Error::ConflictingWals {
                language: language.to_string(),
                feature: feature.to_string(),
                first: prev.clone(),
                second: value.to_string(),
            }),
            Some(_) => Ok(()),
            None => {
                by_lang.insert(language.to_string(), value.to_string());
                Ok(())
            }
        }
    }

    pub fn features(&self) -> impl Iterator<Item = &str> {
        self.features.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn values(&self, feature: &str) -> Option<&BTreeMap<String, String>> {
        self.features.get(feature)
    }

    pub fn value(&self, feature: &str, language: &str) -> Option<&str> {
        self.features.get(feature)?.get(language).map(String::as_str)
    }

    /// Features that have a value for every language in `languages`.
    pub fn features_covering<'a>(&'a self, languages: &'a [String]) -> impl Iterator<Item = &'a str> {
        self.features
            .iter()
            .filter(move |(_, by_lang)| languages.iter().all(|l| by_lang.contains_key(l)))
            .map(|(f, _)| f.as_str())
    }
}

pub fn load_wals(text: &str) -> Result<WalsFeatureTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut table = WalsFeatureTable::new();
    for row in reader.deserialize() {
        let row: Row = row?;
        if row.value.is_empty() {
            continue;
        }
        table.insert(&row.language_code, &row.feature_id, &row.value)?;
    }
    Ok(table)
}

pub fn load_wals_file(path: &Path) -> Result<WalsFeatureTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_wals(&text)
}

/// Languages and classes that survive rare-class removal for one feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilteredFeature {
    pub feature: String,
    /// language → class, restricted to surviving classes
    pub assignment: BTreeMap<String, String>,
    pub classes: Vec<String>,
    /// languages in the sample without a value for this feature
    pub missing: usize,
}

impl FilteredFeature {
    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.assignment.keys().map(String::as_str)
    }
}

/// Restricts `feature` to `sample`, then drops every class with fewer than
/// two member languages. Fails when fewer than two classes remain.
pub fn filter_feature(
    table: &WalsFeatureTable,
    feature: &str,
    sample: &BTreeSet<String>,
) -> Result<FilteredFeature> {
    let by_lang = table
        .values(feature)
        .ok_or_else(|| Error::FeatureNotFound(feature.to_string()))?;
    let present: BTreeMap<&String, &String> = by_lang
        .iter()
        .filter(|(l, _)| sample.contains(*l))
        .collect();
    let missing = sample.len() - present.len();

    let mut counts: BTreeMap<&String, usize> = BTreeMap::new();
    for v in present.values() {
        *counts.entry(v).or_default() += 1;
    }
    let classes: Vec<String> = counts
        .iter()
        .filter(|(_, n)| **n >= 2)
        .map(|(c, _)| (*c).clone())
        .collect();
    if classes.len() < 2 {
        return Err(Error::UnusableFeature {
            feature: feature.to_string(),
            reason: format!(
                "{} class(es) with at least two languages among {} sampled",
                classes.len(),
                present.len()
            ),
        });
    }
    let assignment = present
        .into_iter()
        .filter(|(_, v)| classes.contains(v))
        .map(|(l, v)| (l.clone(), v.clone()))
        .collect();
    Ok(FilteredFeature {
        feature: feature.to_string(),
        assignment,
        classes,
        missing,
    })
}
