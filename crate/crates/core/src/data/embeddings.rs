//! Plain-text language embedding tables (`<code> <v1> ... <vd>` per line,
//! optional `<count> <dim>` header).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageEmbeddingTable {
    /// Number of fine-tuning epochs behind these vectors; 0 for pretrained.
    pub epoch: usize,
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl LanguageEmbeddingTable {
    pub fn new(epoch: usize, dim: usize) -> Self {
        LanguageEmbeddingTable {
            epoch,
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, code: &str) -> Option<&[f64]> {
        self.vectors.get(code).map(Vec::as_slice)
    }

    pub fn contains(&self, code: &str) -> bool {
        self.vectors.contains_key(code)
    }

    pub fn insert(&mut self, code: impl Into<String>, v: Vec<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::invalid(
                "embedding table",
                format!("vector of length {} in a {}-d table", v.len(), self.dim),
            ));
        }
        self.vectors.insert(code.into(), v);
        Ok(())
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Serializes with a header line; floats use the shortest representation
    /// that parses back to the same bits.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.vectors.len(), self.dim);
        for (code, v) in &self.vectors {
            out.push_str(code);
            for x in v {
                write!(out, " {x:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_whitespace();
    let (a, b) = (it.next()?, it.next()?);
    if it.next().is_some() {
        return None;
    }
    Some((a.parse().ok()?, b.parse().ok()?))
}

/// Parses an embedding file. The result is tagged as epoch 0.
pub fn load_embeddings(text: &str) -> Result<LanguageEmbeddingTable> {
    let mut dim: Option<usize> = None;
    let mut declared_count = None;
    let mut vectors = BTreeMap::new();
    let mut first = true;

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if first {
            first = false;
            if let Some((count, d)) = parse_header(line) {
                declared_count = Some((count, line_no));
                dim = Some(d);
                continue;
            }
        }
        let mut fields = line.split_whitespace();
        let code = fields.next().expect("non-empty line");
        let values = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("invalid number `{f}`"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("language `{code}` has no values"),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("non-finite value {bad}"),
            });
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("`{code}` has {} values, expected {d}", values.len()),
                })
            }
            _ => {}
        }
        if vectors.insert(code.to_string(), values).is_some() {
            return Err(Error::DuplicateLanguage {
                code: code.to_string(),
                line: line_no,
            });
        }
    }

    if let Some((count, line)) = declared_count {
        if count != vectors.len() {
            return Err(Error::Parse {
                line,
                msg: format!("header declares {count} languages, found {}", vectors.len()),
            });
        }
    }
    let dim = dim.ok_or_else(|| Error::Parse {
        line: 0,
        msg: "embedding file has no vectors".into(),
    })?;
    Ok(LanguageEmbeddingTable {
        epoch: 0,
        dim,
        vectors,
    })
}

pub fn load_embeddings_file(path: &Path) -> Result<LanguageEmbeddingTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_embeddings(&text)
}

/// File name used for the snapshot after `epoch` epochs.
pub fn snapshot_file_name(epoch: usize) -> String {
    format!("langemb.e{epoch}.vec")
}

/// Loads every `langemb.e{N}.vec` in `dir`, ordered by epoch and tagged with it.
pub fn load_snapshot_dir(dir: &Path) -> Result<Vec<LanguageEmbeddingTable>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let epoch = name
            .strip_prefix("langemb.e")
            .and_then(|r| r.strip_suffix(".vec"))
            .and_then(|n| n.parse::<usize>().ok());
        if let Some(e) = epoch {
            let mut table = load_embeddings_file(&entry.path())?;
            table.epoch = e;
            found.push(table);
        }
    }
    found.sort_by_key(|t| t.epoch);
    if found.is_empty() {
        return Err(Error::Config(format!(
            "no langemb.e*.vec snapshots in {}",
            dir.display()
        )));
    }
    Ok(found)
}
