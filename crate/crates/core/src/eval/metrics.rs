use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::fusion::PredictionMatrix;
use crate::label_space::MultiHot;

/// Decision threshold used when none is configured.
pub const DEFAULT_TAU: f64 = 0.5;

/// Pooled true-positive, false-positive and false-negative counts. Counts are
/// additive, so shards can be merged in any order.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl PairCounts {
    pub fn add(&mut self, pred: &MultiHot, truth: &MultiHot) {
        debug_assert_eq!(pred.len(), truth.len());
        for (&p, &t) in pred.bits().iter().zip(truth.bits()) {
            self.tally(p, t);
        }
    }

    /// Thresholds `probs` at `tau` and counts against `truth`.
    pub fn add_row(&mut self, probs: &[f64], truth: &MultiHot, tau: f64) {
        debug_assert_eq!(probs.len(), truth.len());
        for (&p, &t) in probs.iter().zip(truth.bits()) {
            self.tally(p >= tau, t);
        }
    }

    fn tally(&mut self, p: bool, t: bool) {
        match (p, t) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => {}
        }
    }

    pub fn merge(&mut self, other: PairCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    /// `2TP / (2TP + FP + FN)`, or 1.0 when there is nothing to count.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            log::warn!("micro-F1 of an empty problem (no predicted or true labels); reporting 1.0");
            return 1.0;
        }
        (2 * self.tp) as f64 / denom as f64
    }
}

/// Bit is set iff the probability is at least `tau`.
pub fn threshold_predictions(matrix: &PredictionMatrix, tau: f64) -> Vec<MultiHot> {
    matrix
        .rows()
        .map(|row| row.iter().map(|&p| p >= tau).collect::<Vec<bool>>().into())
        .collect()
}

fn check_shapes(pred: &[MultiHot], truth: &[MultiHot]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!("{} predicted rows, {} true rows", pred.len(), truth.len())));
    }
    if let Some(i) = (0..pred.len()).find(|&i| pred[i].len() != truth[i].len()) {
        return Err(Error::Shape(format!(
            "row {i}: {} predicted labels, {} true labels",
            pred[i].len(),
            truth[i].len()
        )));
    }
    Ok(())
}

pub fn pair_counts(pred: &[MultiHot], truth: &[MultiHot]) -> Result<PairCounts> {
    check_shapes(pred, truth)?;
    let mut c = PairCounts::default();
    for (p, t) in pred.iter().zip(truth) {
        c.add(p, t);
    }
    Ok(c)
}

/// Micro-averaged F1 over every (product, class) pair.
pub fn micro_f1(pred: &[MultiHot], truth: &[MultiHot]) -> Result<f64> {
    Ok(pair_counts(pred, truth)?.f1())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCounts {
    pub label: String,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    /// Products truly in the class (`tp + fn`).
    pub support: u64,
}

pub fn per_class_counts(pred: &[MultiHot], truth: &[MultiHot], labels: &[String]) -> Result<Vec<ClassCounts>> {
    check_shapes(pred, truth)?;
    if let Some(t) = truth.iter().find(|t| t.len() != labels.len()) {
        return Err(Error::Shape(format!("{} labels in vocabulary, rows have {}", labels.len(), t.len())));
    }
    let mut out: Vec<ClassCounts> = labels
        .iter()
        .map(|l| ClassCounts {
            label: l.clone(),
            tp: 0,
            fp: 0,
            fn_: 0,
            support: 0,
        })
        .collect();
    for (p, t) in pred.iter().zip(truth) {
        for (c, (&pb, &tb)) in out.iter_mut().zip(p.bits().iter().zip(t.bits())) {
            match (pb, tb) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
            c.support += u64::from(tb);
        }
    }
    Ok(out)
}

/// One row of a misclassification table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedRow {
    pub label: String,
    pub fn_: u64,
    pub support: u64,
}

impl RankedRow {
    pub fn ratio(&self) -> f64 {
        self.fn_ as f64 / self.support as f64
    }

    /// Exact comparison of `fn / support`, larger ratio first, then label.
    fn rank_cmp(&self, other: &RankedRow) -> Ordering {
        let lhs = u128::from(other.fn_) * u128::from(self.support);
        let rhs = u128::from(self.fn_) * u128::from(other.support);
        lhs.cmp(&rhs).then_with(|| self.label.cmp(&other.label))
    }
}

impl fmt::Display for RankedRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}/{})", self.label, self.fn_, self.support)
    }
}

/// The `k` classes with the largest share of missed products. Classes
/// without support are left out.
pub fn top_misclassified(counts: &[ClassCounts], k: usize) -> Vec<RankedRow> {
    let mut rows: Vec<RankedRow> = counts
        .iter()
        .filter(|c| c.support > 0)
        .map(|c| RankedRow {
            label: c.label.clone(),
            fn_: c.fn_,
            support: c.support,
        })
        .collect();
    rows.sort_by(RankedRow::rank_cmp);
    rows.truncate(k);
    rows
}
