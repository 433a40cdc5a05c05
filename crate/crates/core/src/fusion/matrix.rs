use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hash;
use crate::label_space::ProductRecord;

pub const MATRIX_FORMAT_VERSION: u32 = 1;

/// `N x L` class probabilities for one modality (or one fused output), one
/// row per product id.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    pub modality: String,
    /// Hash of the label vocabulary the columns refer to.
    pub labels_hash: u64,
    /// Extra header entries (fusion policy, parameters, ...).
    pub params: BTreeMap<String, String>,
    ids: Vec<String>,
    num_labels: usize,
    values: Vec<f64>,
}

fn valid_token(s: &str) -> bool {
    !s.is_empty() && !s.contains([',', '=', '\n', '\r'])
}

impl PredictionMatrix {
    pub fn new(modality: impl Into<String>, ids: Vec<String>, num_labels: usize, values: Vec<f64>) -> Result<Self> {
        let modality = modality.into();
        if !valid_token(&modality) {
            return Err(Error::Invalid(format!("invalid modality name `{modality}`")));
        }
        if num_labels == 0 {
            return Err(Error::Shape("a prediction matrix needs at least one label".into()));
        }
        if values.len() != ids.len() * num_labels {
            return Err(Error::Shape(format!(
                "{} ids x {num_labels} labels needs {} values, got {}",
                ids.len(),
                ids.len() * num_labels,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Invalid(format!("probability {v} outside [0, 1]")));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !valid_token(id) || id.trim() != id {
                return Err(Error::InvalidId(id.clone()));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(PredictionMatrix {
            modality,
            labels_hash: 0,
            params: BTreeMap::new(),
            ids,
            num_labels,
            values,
        })
    }

    pub fn from_rows(modality: impl Into<String>, ids: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let l = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != l) {
            return Err(Error::Shape("prediction rows differ in length".into()));
        }
        Self::new(modality, ids, l, rows.concat())
    }

    pub fn with_labels_hash(mut self, hash: u64) -> Self {
        self.labels_hash = hash;
        self
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn num_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.num_labels..(i + 1) * self.num_labels]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.num_labels)
    }

    pub fn get(&self, row: usize, label: usize) -> f64 {
        self.values[row * self.num_labels + label]
    }

    /// Rows for `ids`, in that order. Every id must be present.
    pub fn select(&self, ids: &[String]) -> Result<PredictionMatrix> {
        let index: HashMap<&str, usize> = self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut values = Vec::with_capacity(ids.len() * self.num_labels);
        for id in ids {
            let &i = index
                .get(id.as_str())
                .ok_or_else(|| Error::Invalid(format!("id `{id}` not in matrix `{}`", self.modality)))?;
            values.extend_from_slice(self.row(i));
        }
        let mut out = PredictionMatrix::new(self.modality.clone(), ids.to_vec(), self.num_labels, values)?;
        out.labels_hash = self.labels_hash;
        out.params = self.params.clone();
        Ok(out)
    }

    pub fn header(&self) -> String {
        let mut h = format!(
            "#modality={},labels_hash={},L={},format={MATRIX_FORMAT_VERSION}",
            self.modality,
            hash::to_hex(self.labels_hash),
            self.num_labels
        );
        for (k, v) in &self.params {
            let _ = write!(h, ",{k}={v}");
        }
        h
    }

    /// Header line followed by one `<id>,<p1>,...,<pL>` line per row. Values
    /// use the shortest representation that parses back to the same `f64`.
    pub fn to_text(&self) -> Result<String> {
        for (k, v) in &self.params {
            if !valid_token(k) || !valid_token(v) {
                return Err(Error::Invalid(format!("header entry `{k}={v}` cannot be serialized")));
            }
        }
        let mut out = self.header();
        out.push('\n');
        for (id, row) in self.ids.iter().zip(self.rows()) {
            out.push_str(id);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::parse(path, 1, "empty matrix file"))?;
        let body = header
            .strip_prefix('#')
            .ok_or_else(|| Error::parse(path, 1, "missing `#modality=...` header"))?;
        let mut fields = BTreeMap::new();
        for entry in body.split(',') {
            let (k, v) = entry
                .split_once('=')
                .ok_or_else(|| Error::parse(path, 1, format!("bad header entry `{entry}`")))?;
            fields.insert(k.to_string(), v.to_string());
        }
        let mut take = |key: &str| {
            fields
                .remove(key)
                .ok_or_else(|| Error::parse(path, 1, format!("header lacks `{key}`")))
        };
        let modality = take("modality")?;
        let labels_hash = hash::from_hex(&take("labels_hash")?)
            .ok_or_else(|| Error::parse(path, 1, "bad labels_hash"))?;
        let l: usize = take("L")?
            .parse()
            .map_err(|_| Error::parse(path, 1, "bad L"))?;
        if let Some(v) = fields.remove("format") {
            if v != MATRIX_FORMAT_VERSION.to_string() {
                return Err(Error::parse(path, 1, format!("unsupported matrix format {v}")));
            }
        }
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let id = parts.next().unwrap_or_default();
            let row: Vec<f64> = parts
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
            if row.len() != l {
                return Err(Error::parse(path, lineno, format!("expected {l} values, found {}", row.len())));
            }
            ids.push(id.to_string());
            values.extend(row);
        }
        let mut m = PredictionMatrix::new(modality, ids, l, values).map_err(|e| Error::parse(path, 0, e.to_string()))?;
        m.labels_hash = labels_hash;
        m.params = fields;
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// Outcome of importing externally produced scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportedScores {
    pub matrix: PredictionMatrix,
    /// Rows skipped because their id is not in the dataset.
    pub unknown_ids: usize,
    /// Values pulled back into `[0, 1]`.
    pub clamped: usize,
}

fn clamp_counted(v: f64, clamped: &mut usize) -> f64 {
    let c = v.clamp(0.0, 1.0);
    if c != v {
        *clamped += 1;
    }
    c
}

/// Reads headerless `<id>,<p1>,...,<pL>` lines (lines starting with `#` are
/// ignored). Rows with unknown ids are skipped and counted, out-of-range
/// values are clamped and counted, and a wrong column count is an error.
pub fn import_scores(
    path: &Path,
    modality: &str,
    num_labels: usize,
    known_ids: &HashSet<&str>,
) -> Result<ImportedScores> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (mut ids, mut values) = (Vec::new(), Vec::new());
    let (mut unknown_ids, mut clamped) = (0, 0);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',');
        let id = parts.next().unwrap_or_default().trim();
        let row: Vec<f64> = parts
            .map(|p| p.trim().parse::<f64>().ok().filter(|v| !v.is_nan()))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::parse(path, i + 1, "unparseable score"))?;
        if row.len() != num_labels {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected {num_labels} scores, found {}", row.len()),
            ));
        }
        if !known_ids.contains(id) {
            unknown_ids += 1;
            continue;
        }
        ids.push(id.to_string());
        values.extend(row.into_iter().map(|v| clamp_counted(v, &mut clamped)));
    }
    let matrix = PredictionMatrix::new(modality, ids, num_labels, values)?;
    Ok(ImportedScores {
        matrix,
        unknown_ids,
        clamped,
    })
}

/// Builds a matrix from the `scores` carried by dataset records. Records
/// without scores for `modality` are skipped.
pub fn scores_from_records(records: &[ProductRecord], modality: &str, num_labels: usize) -> Result<ImportedScores> {
    let (mut ids, mut values, mut clamped) = (Vec::new(), Vec::new(), 0);
    for r in records {
        let Some(row) = r.external_scores.get(modality) else {
            continue;
        };
        if row.len() != num_labels {
            return Err(Error::Shape(format!(
                "record `{}` has {} `{modality}` scores, expected {num_labels}",
                r.id,
                row.len()
            )));
        }
        ids.push(r.id.clone());
        values.extend(row.iter().map(|&v| clamp_counted(v, &mut clamped)));
    }
    let matrix = PredictionMatrix::new(modality, ids, num_labels, values)?;
    Ok(ImportedScores {
        matrix,
        unknown_ids: 0,
        clamped,
    })
}

/// Matrices restricted to the ids they all share, in the order of the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Aligned {
    pub matrices: Vec<PredictionMatrix>,
    /// Ids dropped from each input matrix.
    pub dropped: Vec<Vec<String>>,
}

pub fn align(matrices: &[PredictionMatrix]) -> Result<Aligned> {
    if matrices.len() < 2 {
        return Err(Error::Arity {
            expected: 2,
            got: matrices.len(),
        });
    }
    let first = &matrices[0];
    for m in &matrices[1..] {
        if m.num_labels != first.num_labels {
            return Err(Error::Shape(format!(
                "`{}` has {} labels, `{}` has {}",
                first.modality, first.num_labels, m.modality, m.num_labels
            )));
        }
        if m.labels_hash != first.labels_hash {
            return Err(Error::HashMismatch {
                expected: first.labels_hash,
                found: m.labels_hash,
            });
        }
    }
    let sets: Vec<HashSet<&str>> = matrices
        .iter()
        .map(|m| m.ids.iter().map(String::as_str).collect())
        .collect();
    let common: Vec<String> = first
        .ids
        .iter()
        .filter(|id| sets.iter().all(|s| s.contains(id.as_str())))
        .cloned()
        .collect();
    if common.is_empty() {
        return Err(Error::EmptyAlignment);
    }
    let keep: HashSet<&str> = common.iter().map(String::as_str).collect();
    let dropped = matrices
        .iter()
        .map(|m| m.ids.iter().filter(|id| !keep.contains(id.as_str())).cloned().collect())
        .collect();
    let matrices = matrices.iter().map(|m| m.select(&common)).collect::<Result<_>>()?;
    Ok(Aligned { matrices, dropped })
}

/// Checks that matrices are already aligned: same ids, same label count.
pub(crate) fn check_aligned(matrices: &[PredictionMatrix]) -> Result<()> {
    let first = matrices.first().ok_or(Error::Arity { expected: 1, got: 0 })?;
    for m in matrices {
        if m.ids != first.ids || m.num_labels != first.num_labels {
            return Err(Error::Shape(format!(
                "`{}` ({}x{}) is not aligned with `{}` ({}x{})",
                m.modality,
                m.num_rows(),
                m.num_labels,
                first.modality,
                first.num_rows(),
                first.num_labels
            )));
        }
        if m.labels_hash != first.labels_hash {
            return Err(Error::HashMismatch {
                expected: first.labels_hash,
                found: m.labels_hash,
            });
        }
    }
    Ok(())
}
