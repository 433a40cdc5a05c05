use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fusion::PredictionMatrix;
use crate::label_space::MultiHot;

use super::metrics::{pair_counts, per_class_counts, threshold_predictions, top_misclassified, ClassCounts, RankedRow};

/// Number of rows in a misclassification table unless configured otherwise.
pub const DEFAULT_TOP_K: usize = 15;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub name: String,
    pub tau: f64,
    pub micro_f1: f64,
    pub classes: Vec<ClassCounts>,
    pub ranked: Vec<RankedRow>,
}

impl EvalReport {
    /// Thresholds `matrix` at `tau` and scores it against `truth` (rows in
    /// the same order), keeping the `k` most missed classes.
    pub fn evaluate(matrix: &PredictionMatrix, truth: &[MultiHot], labels: &[String], tau: f64, k: usize) -> Result<Self> {
        let pred = threshold_predictions(matrix, tau);
        let micro_f1 = pair_counts(&pred, truth)?.f1();
        let classes = per_class_counts(&pred, truth, labels)?;
        let ranked = top_misclassified(&classes, k);
        Ok(EvalReport {
            name: matrix.modality.clone(),
            tau,
            micro_f1,
            classes,
            ranked,
        })
    }

    /// Miss ratio of the worst class, 0 when no class has support.
    pub fn worst_ratio(&self) -> f64 {
        self.ranked.first().map_or(0.0, RankedRow::ratio)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Tsv,
    Markdown,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Tsv => "tsv",
            ReportFormat::Markdown => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(ReportFormat::Tsv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|")
}

/// Serializes the score and the ranked misclassification table.
pub fn emit_report(report: &EvalReport, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Tsv => {
            let _ = writeln!(
                out,
                "#name={}\ttau={:.4}\tmicro_f1={:.4}",
                report.name, report.tau, report.micro_f1
            );
            out.push_str("rank\tlabel\tfn\tsupport\tratio\n");
            for (i, r) in report.ranked.iter().enumerate() {
                let _ = writeln!(out, "{}\t{}\t{}\t{}\t{:.4}", i + 1, r.label, r.fn_, r.support, r.ratio());
            }
        }
        ReportFormat::Markdown => {
            let _ = writeln!(out, "## {}\n", md_escape(&report.name));
            let _ = writeln!(out, "micro-F1: {:.4} (tau = {:.4})\n", report.micro_f1, report.tau);
            out.push_str("| Rank | Category (fn/support) | Miss ratio |\n");
            out.push_str("|---:|:---|---:|\n");
            for (i, r) in report.ranked.iter().enumerate() {
                let _ = writeln!(out, "| {} | {} | {:.4} |", i + 1, md_escape(&r.to_string()), r.ratio());
            }
        }
    }
    out
}

/// Micro-F1 of several models side by side.
pub fn emit_score_table(rows: &[(String, f64)], format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Tsv => {
            out.push_str("model\tmicro_f1\n");
            for (name, f1) in rows {
                let _ = writeln!(out, "{name}\t{f1:.4}");
            }
        }
        ReportFormat::Markdown => {
            out.push_str("| Model | Micro-F1 |\n|:---|---:|\n");
            for (name, f1) in rows {
                let _ = writeln!(out, "| {} | {f1:.4} |", md_escape(name));
            }
        }
    }
    out
}
