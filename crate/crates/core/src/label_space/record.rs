use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One product. `labels` holds trimmed raw category strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductRecord {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub labels: BTreeSet<String>,
    /// Per-modality score vectors supplied by an external model.
    #[serde(default, rename = "scores", skip_serializing_if = "BTreeMap::is_empty")]
    pub external_scores: BTreeMap<String, Vec<f64>>,
}

impl ProductRecord {
    pub fn new<I, S>(id: impl Into<String>, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut record = ProductRecord {
            id: id.into(),
            title: String::new(),
            description: String::new(),
            labels: BTreeSet::new(),
            external_scores: BTreeMap::new(),
        };
        record.labels = normalize_labels(labels);
        record
    }

    pub fn with_text(mut self, title: impl Into<String>, description: impl Into<String>) -> Self {
        self.title = title.into();
        self.description = description.into();
        self
    }

    fn normalize(&mut self) {
        let labels = std::mem::take(&mut self.labels);
        self.labels = normalize_labels(labels);
    }
}

fn normalize_labels<I, S>(labels: I) -> BTreeSet<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    labels
        .into_iter()
        .map(|l| l.as_ref().trim().to_string())
        .filter(|l| !l.is_empty())
        .collect()
}

/// Reads a line-delimited JSON dataset. Blank lines are ignored; ids must be
/// non-empty and unique.
pub fn read_dataset(path: &Path) -> Result<Vec<ProductRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut record: ProductRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        record.normalize();
        if record.id.trim().is_empty() {
            return Err(Error::parse(path, lineno + 1, "empty product id"));
        }
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_dataset(path: &Path, records: &[ProductRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).expect("records always serialize");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
