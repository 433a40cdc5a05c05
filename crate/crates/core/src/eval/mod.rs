//! Thresholding, micro-F1, per-class error analysis, synthetic modalities
//! and reports.

mod metrics;
mod report;
mod synth;

pub use metrics::{
    micro_f1, pair_counts, per_class_counts, threshold_predictions, top_misclassified, ClassCounts, PairCounts,
    RankedRow, DEFAULT_TAU,
};
pub use report::{emit_report, emit_score_table, EvalReport, ReportFormat, DEFAULT_TOP_K};
pub use synth::{generate_synthetic_modality, synthetic_truth, SkillProfile, DEFAULT_TEMPERATURE, SATURATION};
