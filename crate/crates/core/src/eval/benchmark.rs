//! Train/evaluate loops over models, folds and metrics.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::{
    absolute_error, absolute_error_pairs, auc_link_prediction, heldout_word_ll, rank_score, sample_negatives,
    variation_of_information, LinkScorer, NullScorer,
};
use crate::corpus::{EdgeList, NodeCorpus, SplitPlan};
use crate::error::{invalid, Error, Result};
use crate::par::{self, Execution};
use crate::sampler::{run, Model, ModelConfig};
use crate::synthgen::GroundTruth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    NetVi,
    TopicVi,
    NetAe,
    TopicAe,
    Rank,
    Auc,
    WordLl,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::NetVi,
        Metric::TopicVi,
        Metric::NetAe,
        Metric::TopicAe,
        Metric::Rank,
        Metric::Auc,
        Metric::WordLl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::NetVi => "net_vi",
            Metric::TopicVi => "topic_vi",
            Metric::NetAe => "net_ae",
            Metric::TopicAe => "topic_ae",
            Metric::Rank => "rank",
            Metric::Auc => "auc",
            Metric::WordLl => "word_ll",
        }
    }

    pub fn needs_truth(self) -> bool {
        matches!(self, Metric::NetVi | Metric::TopicVi | Metric::NetAe | Metric::TopicAe)
    }

    pub fn needs_folds(self) -> bool {
        matches!(self, Metric::Rank | Metric::Auc)
    }

    /// Expands a comma-separated list. Short names cover metric families:
    /// `vi`, `ae`, `rank`, `auc`, `ll`.
    pub fn parse_list(s: &str) -> Result<Vec<Metric>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let group: &[Metric] = match part {
                "vi" => &[Metric::NetVi, Metric::TopicVi],
                "ae" => &[Metric::NetAe, Metric::TopicAe],
                "ll" => &[Metric::WordLl],
                other => &[other.parse()?],
            };
            for &m in group {
                if !out.contains(&m) {
                    out.push(m);
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| invalid(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub model: String,
    pub metric: Metric,
    pub fold: Option<usize>,
    pub seed: u64,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub rows: Vec<ScoreRow>,
}

impl ScoreReport {
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "model\tmetric\tfold\tseed\tvalue")?;
        for r in &self.rows {
            let fold = r.fold.map_or_else(|| "-".to_string(), |f| f.to_string());
            writeln!(out, "{}\t{}\t{}\t{}\t{}", r.model, r.metric, fold, r.seed, r.value)?;
        }
        Ok(())
    }

    /// Mean value over all rows for one model and metric.
    pub fn mean(&self, model: &str, metric: Metric) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.model == model && r.metric == metric)
            .map(|r| r.value)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub metrics: Vec<Metric>,
    /// Negatives sampled per fold for AUC.
    pub negatives: usize,
    pub include_self_loops: bool,
    /// Add rank/AUC rows for the random-score baseline.
    pub include_null: bool,
    /// Seed for negatives and the null model.
    pub seed: u64,
    pub exec: Execution,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            metrics: Metric::ALL.to_vec(),
            negatives: 500,
            include_self_loops: true,
            include_null: true,
            seed: 0,
            exec: Execution::default(),
        }
    }
}

pub struct BenchmarkData<'a> {
    pub edges: &'a EdgeList,
    pub corpus: &'a NodeCorpus,
    pub truth: Option<&'a GroundTruth>,
    /// Edge folds for rank/AUC and a word holdout for held-out likelihood.
    pub splits: &'a SplitPlan,
}

enum Job<'a> {
    Recovery(&'a ModelConfig),
    Fold(Option<&'a ModelConfig>, usize),
    Words(&'a ModelConfig),
}

pub const NULL_MODEL: &str = "null";

/// Recovery metrics for one fitted model against ground truth.
pub fn recovery_rows(
    cfg: &ModelConfig,
    state: &crate::sampler::GibbsState,
    truth: &GroundTruth,
    metrics: &[Metric],
) -> Result<Vec<ScoreRow>> {
    let mut rows = Vec::new();
    let mut push = |metric, value| {
        rows.push(ScoreRow {
            model: cfg.model.name().to_string(),
            metric,
            fold: None,
            seed: cfg.seed,
            value,
        })
    };
    let same_k = state.k() == truth.k;
    for &metric in metrics {
        match metric {
            Metric::NetVi if cfg.model.uses_edges() => {
                push(metric, variation_of_information(&truth.edge_pairs, state.edge_assignments())?)
            }
            Metric::NetAe if cfg.model.uses_edges() && same_k => push(
                metric,
                absolute_error_pairs(&truth.edge_pairs, state.edge_assignments(), truth.k)? as f64,
            ),
            Metric::TopicVi | Metric::TopicAe if cfg.model.uses_words() => {
                let t = truth.word_topic_labels();
                let e: Vec<usize> = state.word_topics().iter().flatten().copied().collect();
                if metric == Metric::TopicVi {
                    push(metric, variation_of_information(&t, &e)?);
                } else if same_k {
                    push(metric, absolute_error(&t, &e, truth.k)? as f64);
                }
            }
            _ => {}
        }
    }
    Ok(rows)
}

/// Fits every model on the applicable splits and scores it. Jobs run in
/// parallel under `Execution::Parallel`; rows come back in a fixed order.
pub fn run_benchmark(models: &[ModelConfig], data: &BenchmarkData, bench: &BenchmarkConfig) -> Result<ScoreReport> {
    let wants = |m: Metric| bench.metrics.contains(&m);
    if bench.metrics.iter().any(|m| m.needs_truth()) && data.truth.is_none() {
        return Err(invalid("AE and VI require ground truth"));
    }
    if bench.metrics.iter().any(|m| m.needs_folds()) && data.splits.num_folds() == 0 {
        return Err(invalid("rank and AUC need edge folds"));
    }
    let mut jobs = Vec::new();
    if bench.metrics.iter().any(|m| m.needs_truth()) {
        jobs.extend(models.iter().map(Job::Recovery));
    }
    if wants(Metric::Rank) || wants(Metric::Auc) {
        for f in 0..data.splits.num_folds() {
            if bench.include_null {
                jobs.push(Job::Fold(None, f));
            }
            jobs.extend(models.iter().filter(|c| c.model.uses_edges()).map(|c| Job::Fold(Some(c), f)));
        }
    }
    if wants(Metric::WordLl) {
        if data.splits.word_test.is_empty() {
            return Err(invalid("held-out likelihood needs a word holdout"));
        }
        jobs.extend(models.iter().filter(|c| c.model.uses_words()).map(Job::Words));
    }
    let m = data.edges.num_nodes();
    let results = par::map(bench.exec, &jobs, |job| -> Result<Vec<ScoreRow>> {
        match *job {
            Job::Recovery(cfg) => {
                let out = run(cfg, data.edges, data.corpus)?;
                recovery_rows(cfg, &out.state, data.truth.expect("checked"), &bench.metrics)
            }
            Job::Fold(cfg, f) => {
                let (train, test) = data.splits.fold(data.edges, f);
                let (name, seed, scores) = match cfg {
                    Some(cfg) => {
                        let out = run(cfg, &train, data.corpus)?;
                        let scores = out.estimate.link_scores(Execution::Sequential);
                        (cfg.model.name(), cfg.seed, scores)
                    }
                    None => {
                        let null = NullScorer { num_nodes: m, seed: bench.seed, stream: f as u64 };
                        (NULL_MODEL, bench.seed, null.link_scores(Execution::Sequential))
                    }
                };
                let mut rows = Vec::new();
                let mut push = |metric, value| {
                    rows.push(ScoreRow { model: name.to_string(), metric, fold: Some(f), seed, value })
                };
                if wants(Metric::Rank) {
                    push(Metric::Rank, rank_score(&scores, m, &test, bench.include_self_loops)?);
                }
                if wants(Metric::Auc) {
                    let negatives =
                        sample_negatives(m, &[&train, &test], bench.negatives, bench.include_self_loops, bench.seed, f as u64)?;
                    push(Metric::Auc, auc_link_prediction(&scores, m, &test, &negatives)?);
                }
                Ok(rows)
            }
            Job::Words(cfg) => {
                let (train_words, test) = data.splits.word_split(data.corpus);
                let out = run(cfg, data.edges, &train_words)?;
                Ok(vec![ScoreRow {
                    model: cfg.model.name().to_string(),
                    metric: Metric::WordLl,
                    fold: None,
                    seed: cfg.seed,
                    value: heldout_word_ll(&out.estimate, &test),
                }])
            }
        }
    });
    let mut report = ScoreReport::default();
    for rows in results {
        report.rows.extend(rows?);
    }
    Ok(report)
}

/// Convenience: all models share every field of `base` except the model.
pub fn model_grid(base: &ModelConfig, models: &[Model]) -> Vec<ModelConfig> {
    models.iter().map(|&model| ModelConfig { model, ..base.clone() }).collect()
}
