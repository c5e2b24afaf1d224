//! Evaluation metrics and benchmark harness.

mod benchmark;
mod metrics;

pub use benchmark::{
    model_grid, recovery_rows, run_benchmark, BenchmarkConfig, BenchmarkData, Metric, ScoreReport, ScoreRow, NULL_MODEL,
};
pub use metrics::{
    absolute_error, absolute_error_pairs, auc, auc_link_prediction, heldout_word_ll, rank_score, sample_negatives,
    variation_of_information, LinkScorer, NullScorer,
};
