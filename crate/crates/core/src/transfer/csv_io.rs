//! CSV exports for transfer grids.
//!
//! * runs: `train_langs,test_lang,use_lang_emb,seed,accuracy`
//! * summary: `train_langs,test_lang,use_lang_emb,n_seeds,mean,stddev,compared_to,p_value,error`
//! * sentences: `train_langs,test_lang,use_lang_emb,seed,sentence,correct,total`
//!
//! Missing values are empty fields. Multi-language training sets are joined
//! with `+`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::transfer::grid::TransferResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub train_langs: String,
    pub test_lang: String,
    pub use_lang_emb: bool,
    pub seed: u64,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub train_langs: String,
    pub test_lang: String,
    pub use_lang_emb: bool,
    pub n_seeds: usize,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
    pub compared_to: Option<String>,
    pub p_value: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRow {
    pub train_langs: String,
    pub test_lang: String,
    pub use_lang_emb: bool,
    pub seed: u64,
    pub sentence: usize,
    pub correct: usize,
    pub total: usize,
}

pub fn run_rows(cells: &[TransferResult]) -> Vec<RunRow> {
    let mut rows = Vec::new();
    for c in cells {
        for &seed in &c.seeds {
            let accuracy = c.runs.iter().find(|r| r.seed == seed).map(|r| r.accuracy);
            rows.push(RunRow {
                train_langs: c.train_label(),
                test_lang: c.test_lang.clone(),
                use_lang_emb: c.use_lang_emb,
                seed,
                accuracy,
            });
        }
    }
    rows
}

pub fn summary_rows(cells: &[TransferResult]) -> Vec<SummaryRow> {
    cells
        .iter()
        .map(|c| SummaryRow {
            train_langs: c.train_label(),
            test_lang: c.test_lang.clone(),
            use_lang_emb: c.use_lang_emb,
            n_seeds: c.runs.len(),
            mean: c.mean,
            stddev: c.stddev,
            compared_to: c.comparison.as_ref().map(|k| k.against.join("+")),
            p_value: c.comparison.as_ref().map(|k| k.p_value),
            error: c.error.clone(),
        })
        .collect()
}

pub fn sentence_rows(cells: &[TransferResult]) -> Vec<SentenceRow> {
    let mut rows = Vec::new();
    for c in cells {
        for r in &c.runs {
            for (i, (correct, total)) in r.sentences.iter().enumerate() {
                rows.push(SentenceRow {
                    train_langs: c.train_label(),
                    test_lang: c.test_lang.clone(),
                    use_lang_emb: c.use_lang_emb,
                    seed: r.seed,
                    sentence: i,
                    correct: *correct,
                    total: *total,
                });
            }
        }
    }
    rows
}

pub fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_roundtrip_with_missing_fields() {
        let rows = vec![
            SummaryRow {
                train_langs: "fin+est".into(),
                test_lang: "fin".into(),
                use_lang_emb: true,
                n_seeds: 5,
                mean: Some(0.912345678901),
                stddev: Some(0.01),
                compared_to: Some("fin".into()),
                p_value: Some(0.0312),
                error: None,
            },
            SummaryRow {
                train_langs: "spa".into(),
                test_lang: "sme".into(),
                use_lang_emb: false,
                n_seeds: 0,
                mean: None,
                stddev: None,
                compared_to: None,
                p_value: None,
                error: Some("no test corpus for `sme`, really".into()),
            },
        ];
        let mut buf = Vec::new();
        write_rows(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("train_langs,test_lang,use_lang_emb,n_seeds,mean,stddev,compared_to,p_value,error\n"));
        assert_eq!(read_rows::<SummaryRow>(&text).unwrap(), rows);
    }
}
