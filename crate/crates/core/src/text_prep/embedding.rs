use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

use super::tokens::{TokenVocab, PAD};

/// Half-width of the uniform range used for tokens without a pretrained vector.
pub const INIT_RANGE: f64 = 0.25;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PretrainedVectors {
    pub vectors: HashMap<String, Vec<f64>>,
    pub dim: usize,
    /// Lines skipped because they had the wrong arity or unparseable numbers.
    pub malformed: usize,
}

impl PretrainedVectors {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }
}

/// Reads a `token v1 ... vD` text file. Keys are lowercased to match cleaned
/// tokens; the first occurrence of a key wins.
pub fn load_pretrained_vectors(path: &Path, dim: usize) -> Result<PretrainedVectors> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = PretrainedVectors {
        dim,
        ..Default::default()
    };
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else {
            continue;
        };
        let values: Option<Vec<f64>> = fields
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        match values {
            Some(v) if v.len() == dim => {
                out.vectors.entry(token.to_lowercase()).or_insert(v);
            }
            _ => out.malformed += 1,
        }
    }
    if out.malformed > 0 {
        log::warn!("{}: skipped {} malformed line(s)", path.display(), out.malformed);
    }
    Ok(out)
}

/// `V x D` embedding matrix, row-major; row `PAD` is all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub values: Vec<f64>,
    /// Whether each row was copied from a pretrained vector.
    pub covered: Vec<bool>,
}

impl EmbeddingTable {
    pub fn rows(&self) -> usize {
        self.covered.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

/// Copies pretrained rows where available and draws the rest (including the
/// unknown row) uniformly from `[-INIT_RANGE, INIT_RANGE]`.
pub fn init_embedding_table(
    vocab: &TokenVocab,
    pretrained: &PretrainedVectors,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingTable> {
    if dim == 0 {
        return Err(Error::Invalid("embedding dimension must be positive".into()));
    }
    if let Some((t, v)) = pretrained.vectors.iter().find(|(_, v)| v.len() != dim) {
        return Err(Error::Shape(format!(
            "pretrained vector for `{t}` has dimension {}, expected {dim}",
            v.len()
        )));
    }
    let mut rng = rng::stream(seed, rng::EMBEDDING);
    let mut values = vec![0.0; vocab.len() * dim];
    let mut covered = vec![false; vocab.len()];
    for i in 0..vocab.len() {
        if i == PAD {
            continue;
        }
        let row = &mut values[i * dim..(i + 1) * dim];
        match vocab.token(i).and_then(|t| pretrained.get(t)).filter(|_| i > super::UNK) {
            Some(v) => {
                row.copy_from_slice(v);
                covered[i] = true;
            }
            None => row
                .iter_mut()
                .for_each(|x| *x = rng.gen_range(-INIT_RANGE..=INIT_RANGE)),
        }
    }
    Ok(EmbeddingTable {
        dim,
        values,
        covered,
    })
}

/// Fraction of real tokens (padding and unknown excluded) that have a
/// pretrained vector; 0 for a vocabulary without real tokens.
pub fn coverage_ratio(vocab: &TokenVocab, pretrained: &PretrainedVectors) -> f64 {
    let total = vocab.real_len();
    if total == 0 {
        return 0.0;
    }
    let covered = vocab
        .real_tokens()
        .filter(|(_, t)| pretrained.get(t).is_some())
        .count();
    covered as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::super::UNK;
    use super::*;

    fn pretrained(entries: &[(&str, &[f64])], dim: usize) -> PretrainedVectors {
        PretrainedVectors {
            vectors: entries.iter().map(|(t, v)| (t.to_string(), v.to_vec())).collect(),
            dim,
            malformed: 0,
        }
    }

    #[test]
    fn loader_examples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");

        std::fs::write(&path, "hi 0.1 0.2\n").unwrap();
        let p = load_pretrained_vectors(&path, 2).unwrap();
        assert_eq!(p.get("hi"), Some(&[0.1, 0.2][..]));
        assert_eq!(p.malformed, 0);

        std::fs::write(&path, "hi 0.1\n").unwrap();
        let p = load_pretrained_vectors(&path, 2).unwrap();
        assert!(p.is_empty());
        assert_eq!(p.malformed, 1);

        std::fs::write(&path, "a 1 2\nb 3 4\nc 5 6\n").unwrap();
        assert_eq!(load_pretrained_vectors(&path, 2).unwrap().len(), 3);

        std::fs::write(&path, "3 2\nDog 1 x\nDog 1 2\ndog 9 9\n\n").unwrap();
        let p = load_pretrained_vectors(&path, 2).unwrap();
        assert_eq!(p.malformed, 2);
        assert_eq!(p.get("dog"), Some(&[1.0, 2.0][..]));

        assert!(matches!(
            load_pretrained_vectors(&dir.path().join("missing"), 2),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn table_copies_covered_rows() {
        let vocab = TokenVocab::from_tokens(["a"]).unwrap();
        let p = pretrained(&[("a", &[1.0, 2.0])], 2);
        let t = init_embedding_table(&vocab, &p, 2, 42).unwrap();
        assert_eq!(t.rows(), 3);
        assert_eq!(t.row(2), [1.0, 2.0]);
        assert_eq!(t.row(PAD), [0.0, 0.0]);
        assert!(t.row(UNK).iter().all(|x| x.abs() <= INIT_RANGE));
        assert_eq!(t.covered, [false, false, true]);
        assert_eq!(coverage_ratio(&vocab, &p), 1.0);
    }

    #[test]
    fn table_is_deterministic_per_seed() {
        let vocab = TokenVocab::from_tokens(["a", "b", "c"]).unwrap();
        let p = pretrained(&[("b", &[0.5; 4])], 4);
        let a = init_embedding_table(&vocab, &p, 4, 1).unwrap();
        let b = init_embedding_table(&vocab, &p, 4, 1).unwrap();
        let c = init_embedding_table(&vocab, &p, 4, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
        assert!(a.values.iter().all(|x| x.abs() <= INIT_RANGE || *x == 0.5));
    }

    #[test]
    fn dimension_mismatch() {
        let vocab = TokenVocab::from_tokens(["a"]).unwrap();
        let p = pretrained(&[("a", &[1.0, 2.0, 3.0])], 3);
        assert!(matches!(init_embedding_table(&vocab, &p, 2, 0), Err(Error::Shape(_))));
    }

    #[test]
    fn coverage_examples() {
        let vocab = TokenVocab::from_tokens(["a", "b", "c", "d"]).unwrap();
        let p = pretrained(&[("a", &[0.0]), ("b", &[0.0]), ("c", &[0.0]), ("zz", &[0.0])], 1);
        assert_eq!(coverage_ratio(&vocab, &p), 0.75);
        let empty = TokenVocab::from_tokens(Vec::<String>::new()).unwrap();
        assert_eq!(coverage_ratio(&empty, &p), 0.0);
    }
}
