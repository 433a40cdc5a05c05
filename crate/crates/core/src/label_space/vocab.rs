use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hash;

use super::ProductRecord;

/// The filtered, lexicographically ordered label set. Label `i` owns column
/// `i` of every multi-hot target and prediction row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVocabulary {
    labels: Vec<String>,
    counts: Vec<usize>,
    min_count: usize,
}

impl LabelVocabulary {
    /// Builds a vocabulary from explicit `(label, count)` pairs, checking the
    /// ordering and threshold invariants.
    pub fn from_parts(labels: Vec<String>, counts: Vec<usize>, min_count: usize) -> Result<Self> {
        if labels.len() != counts.len() {
            return Err(Error::Shape(format!(
                "{} labels but {} counts",
                labels.len(),
                counts.len()
            )));
        }
        if let Some(w) = labels.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(format!(
                "labels must be unique and sorted, found `{}` before `{}`",
                w[0], w[1]
            )));
        }
        if let Some((l, c)) = labels.iter().zip(&counts).find(|(_, &c)| c < min_count) {
            return Err(Error::Invalid(format!(
                "label `{l}` has count {c} below min_count {min_count}"
            )));
        }
        Ok(LabelVocabulary {
            labels,
            counts,
            min_count,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels
            .binary_search_by(|probe| probe.as_str().cmp(label))
            .ok()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }

    /// FNV-1a over the ordered label list; embedded in every derived artifact.
    pub fn labels_hash(&self) -> u64 {
        hash::hash_list(&self.labels)
    }
}

/// Length-L binary target vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiHot(Vec<bool>);

impl MultiHot {
    pub fn zeros(len: usize) -> Self {
        MultiHot(vec![false; len])
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        MultiHot(bits.iter().map(|&b| b != 0).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.0[i] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

impl From<Vec<bool>> for MultiHot {
    fn from(bits: Vec<bool>) -> Self {
        MultiHot(bits)
    }
}

/// Keeps the labels carried by at least `min_count` products. Counts are taken
/// over the whole corpus, before any split.
pub fn build_vocabulary(records: &[ProductRecord], min_count: usize) -> Result<LabelVocabulary> {
    let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
    for record in records {
        for label in &record.labels {
            *tally.entry(label.as_str()).or_default() += 1;
        }
    }
    let (labels, counts): (Vec<String>, Vec<usize>) = tally
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(l, c)| (l.to_string(), c))
        .unzip();
    if labels.is_empty() {
        return Err(Error::EmptyVocabulary { min_count });
    }
    Ok(LabelVocabulary {
        labels,
        counts,
        min_count,
    })
}

/// Intersects every record's labels with the vocabulary and drops records
/// left without any label. Input order is preserved.
pub fn filter_records(records: &[ProductRecord], vocab: &LabelVocabulary) -> Vec<ProductRecord> {
    records
        .iter()
        .filter_map(|r| {
            let labels: std::collections::BTreeSet<String> = r
                .labels
                .iter()
                .filter(|l| vocab.contains(l))
                .cloned()
                .collect();
            if labels.is_empty() {
                None
            } else {
                Some(ProductRecord {
                    labels,
                    ..r.clone()
                })
            }
        })
        .collect()
}

/// Multi-hot encoding. Unknown labels are always an error; an empty set is an
/// error in `strict` mode and an all-zero vector otherwise.
pub fn encode_labels<I, S>(labels: I, vocab: &LabelVocabulary, strict: bool) -> Result<MultiHot>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut bits = MultiHot::zeros(vocab.len());
    let mut any = false;
    for label in labels {
        let label = label.as_ref().trim();
        let i = vocab
            .index_of(label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
        bits.set(i, true);
        any = true;
    }
    if strict && !any {
        return Err(Error::EmptyLabelSet);
    }
    Ok(bits)
}

/// `records[..n_train]` and `records[n_train..]`; the corpus is assumed to be
/// pre-shuffled, so no reordering happens here.
pub fn split_train_test<T: Clone>(records: &[T], n_train: usize) -> Result<(Vec<T>, Vec<T>)> {
    if n_train > records.len() {
        return Err(Error::SplitOutOfRange {
            n_train,
            len: records.len(),
        });
    }
    let (train, test) = records.split_at(n_train);
    Ok((train.to_vec(), test.to_vec()))
}

/// Writes `#min_count=<n>` followed by one `<count>\t<label>` line per label.
pub fn write_vocabulary(path: &Path, vocab: &LabelVocabulary) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "#min_count={}", vocab.min_count)?;
        for (label, count) in vocab.labels.iter().zip(&vocab.counts) {
            writeln!(out, "{count}\t{label}")?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn read_vocabulary(path: &Path) -> Result<LabelVocabulary> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::io(path, e))?
        .ok_or_else(|| Error::parse(path, 1, "missing #min_count header"))?;
    let min_count = header
        .strip_prefix("#min_count=")
        .and_then(|n| n.trim().parse().ok())
        .ok_or_else(|| Error::parse(path, 1, format!("bad header `{header}`")))?;
    let mut labels = Vec::new();
    let mut counts = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let (count, label) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 2, "expected `<count>\\t<label>`"))?;
        let count = count
            .parse()
            .map_err(|_| Error::parse(path, i + 2, format!("bad count `{count}`")))?;
        labels.push(label.to_string());
        counts.push(count);
    }
    LabelVocabulary::from_parts(labels, counts, min_count).map_err(|e| Error::parse(path, 0, e.to_string()))
}
