use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::estimate::PosteriorEstimate;
use super::state::GibbsState;
use super::ModelConfig;
use crate::corpus::{EdgeList, NodeCorpus};
use crate::crp2d::Pair;
use crate::error::{invalid, Error, Result};
use crate::par::{self, Execution};
use crate::rng::{stream_rng, Stream};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub sweep: u64,
    pub log_joint: f64,
    pub k: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// log joint and K every `trace_every` sweeps, plus the final sweep.
    pub trace: Vec<TracePoint>,
    /// Wall time of the sweeps run by this process only. Not serialized, so
    /// snapshots of identical runs are byte-identical.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl Diagnostics {
    pub fn k_trace(&self) -> Vec<usize> {
        self.trace.iter().map(|p| p.k).collect()
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "sweep\tlog_joint\tk")?;
        for p in &self.trace {
            writeln!(out, "{}\t{}\t{}", p.sweep, p.log_joint, p.k)?;
        }
        Ok(())
    }

    fn record(&mut self, sweep: u64, state: &GibbsState, cfg: &ModelConfig) {
        if self.trace.last().is_some_and(|p| p.sweep == sweep) {
            return;
        }
        self.trace.push(TracePoint {
            sweep,
            log_joint: state.log_joint(cfg),
            k: state.k(),
        });
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Average estimates over every `trace_every`-th sweep from this sweep on,
    /// instead of using the final state alone. Finite models only.
    pub average_from: Option<u64>,
    /// Run `check_invariants` after every sweep.
    pub check_invariants: bool,
}

/// Running mean of estimates, kept in snapshots so resumed runs average the
/// same draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Average {
    pub from: u64,
    pub count: u64,
    pub mean: Option<PosteriorEstimate>,
}

impl Average {
    fn add(&mut self, est: PosteriorEstimate) {
        self.count += 1;
        let w = 1.0 / self.count as f64;
        match &mut self.mean {
            None => self.mean = Some(est),
            Some(mean) => {
                let mix = |dst: &mut [f64], src: &[f64]| {
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += (s - *d) * w;
                    }
                };
                mix(&mut mean.theta, &est.theta);
                for (d, s) in mean.phi.iter_mut().zip(&est.phi) {
                    mix(d, s);
                }
                for (d, s) in mean.psi.iter_mut().zip(&est.psi) {
                    mix(d, s);
                }
                for (d, s) in mean.x.iter_mut().zip(&est.x) {
                    mix(d, s);
                }
            }
        }
    }
}

/// Everything needed to continue a chain exactly where it stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u32,
    pub config: ModelConfig,
    pub sweeps_done: u64,
    pub k: usize,
    pub edge_assignments: Vec<Pair>,
    pub word_topics: Vec<Vec<usize>>,
    pub diagnostics: Diagnostics,
    #[serde(default)]
    pub average: Option<Average>,
    pub estimate: PosteriorEstimate,
    #[serde(default)]
    pub node_labels: Vec<String>,
    #[serde(default)]
    pub vocabulary: Vec<String>,
    /// Free-form input fingerprints (file digests), filled by callers.
    #[serde(default)]
    pub inputs: std::collections::BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: GibbsState,
    pub estimate: PosteriorEstimate,
    pub diagnostics: Diagnostics,
    pub snapshot: Snapshot,
}

/// Runs `config.sweeps` sweeps from a fresh initialization and reports the
/// final state.
pub fn run(config: &ModelConfig, edges: &EdgeList, corpus: &NodeCorpus) -> Result<RunOutput> {
    run_with(config, edges, corpus, &RunOptions::default())
}

pub fn run_with(
    config: &ModelConfig,
    edges: &EdgeList,
    corpus: &NodeCorpus,
    options: &RunOptions,
) -> Result<RunOutput> {
    let state = GibbsState::init(config, edges, corpus)?;
    let average = match options.average_from {
        Some(_) if config.model.is_infinite() => {
            return Err(invalid("estimate averaging needs a fixed number of industries"))
        }
        Some(from) => Some(Average { from, count: 0, mean: None }),
        None => None,
    };
    continue_chain(config, state, 0, Diagnostics::default(), average, options, edges, corpus)
}

/// Continues a chain from a snapshot until `config.sweeps` sweeps are done in
/// total. `config` may raise the sweep count; every other field must match.
pub fn resume(
    snapshot: &Snapshot,
    config: &ModelConfig,
    edges: &EdgeList,
    corpus: &NodeCorpus,
    options: &RunOptions,
) -> Result<RunOutput> {
    if snapshot.version != SNAPSHOT_VERSION {
        return Err(Error::InvalidState(format!(
            "snapshot version {} is not supported (expected {SNAPSHOT_VERSION})",
            snapshot.version
        )));
    }
    let mut base = snapshot.config.clone();
    base.sweeps = config.sweeps;
    if &base != config {
        return Err(Error::InvalidState("snapshot config differs from the requested config".into()));
    }
    if config.sweeps < snapshot.sweeps_done {
        return Err(invalid(format!(
            "snapshot already has {} sweeps, more than the requested {}",
            snapshot.sweeps_done, config.sweeps
        )));
    }
    let state = GibbsState::from_assignments(
        config,
        edges,
        corpus,
        snapshot.k,
        &snapshot.edge_assignments,
        &snapshot.word_topics,
    )?;
    // drop the off-grid point recorded when the earlier run stopped
    let every = config.trace_every.max(1);
    let trace = snapshot
        .diagnostics
        .trace
        .iter()
        .filter(|p| p.sweep % every == 0 || p.sweep == config.sweeps)
        .copied()
        .collect();
    let diagnostics = Diagnostics {
        trace,
        wall_time_secs: 0.0,
    };
    continue_chain(
        config,
        state,
        snapshot.sweeps_done,
        diagnostics,
        snapshot.average.clone(),
        options,
        edges,
        corpus,
    )
}

#[allow(clippy::too_many_arguments)]
fn continue_chain(
    config: &ModelConfig,
    mut state: GibbsState,
    start: u64,
    mut diagnostics: Diagnostics,
    mut average: Option<Average>,
    options: &RunOptions,
    edges: &EdgeList,
    corpus: &NodeCorpus,
) -> Result<RunOutput> {
    let clock = Instant::now();
    let every = config.trace_every.max(1);
    if start == 0 {
        diagnostics.record(0, &state, config);
    }
    for s in start..config.sweeps {
        state.sweep(config, &mut stream_rng(config.seed, Stream::Sweep(s)));
        if options.check_invariants {
            state.check_invariants()?;
        }
        let done = s + 1;
        if done % every == 0 || done == config.sweeps {
            diagnostics.record(done, &state, config);
        }
        if let Some(avg) = average.as_mut() {
            if done >= avg.from && (done - avg.from) % every == 0 {
                avg.add(state.estimate(config));
            }
        }
    }
    diagnostics.wall_time_secs = clock.elapsed().as_secs_f64();
    let estimate = match average.as_ref().and_then(|a| a.mean.clone()) {
        Some(mean) => mean,
        None => state.estimate(config),
    };
    let snapshot = Snapshot {
        version: SNAPSHOT_VERSION,
        config: config.clone(),
        sweeps_done: config.sweeps.max(start),
        k: state.k(),
        edge_assignments: state.edge_assignments().to_vec(),
        word_topics: state.word_topics().to_vec(),
        diagnostics: diagnostics.clone(),
        average,
        estimate: estimate.clone(),
        node_labels: edges.labels().to_vec(),
        vocabulary: corpus.vocabulary().to_vec(),
        inputs: Default::default(),
    };
    Ok(RunOutput {
        state,
        estimate,
        diagnostics,
        snapshot,
    })
}

/// Independent chains for each seed, run as parallel jobs.
pub fn run_chains(
    config: &ModelConfig,
    edges: &EdgeList,
    corpus: &NodeCorpus,
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<RunOutput>> {
    par::map(exec, seeds, |&seed| run(&config.clone().with_seed(seed), edges, corpus))
        .into_iter()
        .collect()
}
