//! Synthetic datasets with known block and topic structure.
//!
//! Generation follows the edge-first process: draw θ over a set of active
//! industry pairs, φ_k over nodes and ψ_k over words; draw each link's pair
//! from θ and its endpoints from φ; then give every node a handful of words
//! whose topics follow the node's edge roles.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{EdgeList, NodeCorpus};
use crate::crp2d::Pair;
use crate::error::{invalid, Error, Result};
use crate::rng::{stream_rng, Rng, Stream};
use crate::sampler::PosteriorEstimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_nodes: usize,
    pub k_true: usize,
    pub active_pairs: usize,
    pub num_edges: usize,
    /// Inclusive range of words drawn per node.
    pub words_per_node: (usize, usize),
    pub vocab_size: usize,
    /// Adjust per-node word counts so the corpus holds exactly this many
    /// tokens. `None` keeps the raw uniform draws.
    pub total_tokens: Option<usize>,
    pub theta_concentration: f64,
    pub phi_concentration: f64,
    pub psi_concentration: f64,
    /// Redraw until every node has at least one link, so the emitted edge
    /// file names every node.
    pub require_all_nodes: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_nodes: 70,
            k_true: 16,
            active_pairs: 20,
            num_edges: 249,
            words_per_node: (0, 12),
            vocab_size: 230,
            total_tokens: Some(230),
            theta_concentration: 1.0,
            phi_concentration: 0.1,
            psi_concentration: 0.01,
            require_all_nodes: true,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let k2 = self.k_true * self.k_true;
        if self.k_true == 0 || self.num_nodes == 0 {
            return Err(invalid("k_true and num_nodes must be positive"));
        }
        if self.active_pairs == 0 || self.active_pairs > k2 {
            return Err(invalid(format!(
                "active_pairs must lie in 1..={k2}, got {}",
                self.active_pairs
            )));
        }
        // every industry must occur in some active pair
        if 2 * self.active_pairs < self.k_true {
            return Err(invalid(format!(
                "{} active pairs cannot cover {} industries",
                self.active_pairs, self.k_true
            )));
        }
        if self.words_per_node.0 > self.words_per_node.1 {
            return Err(invalid("words_per_node range is empty"));
        }
        if self.words_per_node.1 > 0 && self.vocab_size == 0 {
            return Err(invalid("words requested with an empty vocabulary"));
        }
        if let Some(t) = self.total_tokens {
            let (lo, hi) = self.words_per_node;
            if t < lo * self.num_nodes || t > hi * self.num_nodes {
                return Err(invalid(format!("total_tokens {t} unreachable with words_per_node {lo}..={hi}")));
            }
        }
        for c in [self.theta_concentration, self.phi_concentration, self.psi_concentration] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(invalid(format!("concentrations must be positive, got {c}")));
            }
        }
        if self.require_all_nodes && self.num_edges * 2 < self.num_nodes {
            return Err(invalid("too few edges to touch every node"));
        }
        Ok(())
    }
}

/// Hidden structure behind a generated dataset, indexed like the emitted
/// edge list and corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub k: usize,
    pub active_pairs: Vec<Pair>,
    pub edge_pairs: Vec<Pair>,
    pub word_topics: Vec<Vec<usize>>,
    /// `theta[s][r]`, zero outside the active pairs.
    pub theta: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
}

impl GroundTruth {
    pub fn word_topic_labels(&self) -> Vec<usize> {
        self.word_topics.iter().flatten().copied().collect()
    }

    /// The generating parameters as an estimate, with `x_i` set to node
    /// `i`'s edge-role shares (uniform for nodes without links).
    pub fn as_estimate(&self, edges: &EdgeList) -> PosteriorEstimate {
        let k = self.k;
        let mut roles = vec![vec![0.0; k]; edges.num_nodes()];
        for (&(i, j), &(s, r)) in edges.edges().iter().zip(&self.edge_pairs) {
            roles[i][s] += 1.0;
            roles[j][r] += 1.0;
        }
        let x = roles
            .into_iter()
            .map(|row| {
                let total: f64 = row.iter().sum();
                if total == 0.0 {
                    vec![1.0 / k as f64; k]
                } else {
                    row.into_iter().map(|v| v / total).collect()
                }
            })
            .collect();
        PosteriorEstimate {
            k,
            theta: self.theta.iter().flatten().copied().collect(),
            phi: self.phi.clone(),
            psi: self.psi.clone(),
            x,
        }
    }
}

/// A generated dataset and the structure that produced it.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub edges: EdgeList,
    pub corpus: NodeCorpus,
    pub truth: GroundTruth,
}

/// Symmetric Dirichlet draw, computed through log-gamma variates so that
/// small concentrations do not underflow.
pub fn dirichlet(rng: &mut Rng, len: usize, concentration: f64) -> Vec<f64> {
    let gamma = rand_distr::Gamma::new(concentration + 1.0, 1.0).expect("positive shape");
    let mut logs: Vec<f64> = (0..len)
        .map(|_| {
            let g: f64 = rng.sample(gamma);
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            g.ln() + u.ln() / concentration
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in &mut logs {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in &mut logs {
        *v /= total;
    }
    logs
}

fn categorical(rng: &mut Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if u < w {
                return i;
            }
            u -= w;
            last = i;
        }
    }
    last
}

fn choose_active_pairs(rng: &mut Rng, k: usize, count: usize) -> Vec<Pair> {
    let mut all: Vec<Pair> = (0..k).flat_map(|s| (0..k).map(move |r| (s, r))).collect();
    loop {
        all.shuffle(rng);
        let chosen = &all[..count];
        let mut seen = vec![false; k];
        for &(s, r) in chosen {
            seen[s] = true;
            seen[r] = true;
        }
        if seen.iter().all(|&b| b) {
            let mut chosen = chosen.to_vec();
            chosen.sort_unstable();
            return chosen;
        }
    }
}

fn word_counts(rng: &mut Rng, cfg: &SynthConfig) -> Vec<usize> {
    let (lo, hi) = cfg.words_per_node;
    let mut counts: Vec<usize> = (0..cfg.num_nodes).map(|_| rng.random_range(lo..=hi)).collect();
    if let Some(target) = cfg.total_tokens {
        let mut total: usize = counts.iter().sum();
        while total != target {
            let i = rng.random_range(0..counts.len());
            if total > target && counts[i] > lo {
                counts[i] -= 1;
                total -= 1;
            } else if total < target && counts[i] < hi {
                counts[i] += 1;
                total += 1;
            }
        }
    }
    counts
}

const MAX_ATTEMPTS: usize = 10_000;

/// Generates a dataset. Node and word ids follow first appearance in the
/// emitted files, so writing and reloading yields the same ids.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, Stream::Synth);
    let (k, m) = (cfg.k_true, cfg.num_nodes);
    let psi = (0..k).map(|_| dirichlet(&mut rng, cfg.vocab_size, cfg.psi_concentration)).collect::<Vec<_>>();

    let mut attempt = 0;
    let (active, active_theta, phi, raw_edges, pairs) = loop {
        attempt += 1;
        let active = choose_active_pairs(&mut rng, k, cfg.active_pairs);
        let active_theta = dirichlet(&mut rng, active.len(), cfg.theta_concentration);
        let phi: Vec<Vec<f64>> = (0..k).map(|_| dirichlet(&mut rng, m, cfg.phi_concentration)).collect();
        let mut edges = Vec::with_capacity(cfg.num_edges);
        let mut pairs = Vec::with_capacity(cfg.num_edges);
        let mut touched = vec![false; m];
        for _ in 0..cfg.num_edges {
            let (s, r) = active[categorical(&mut rng, &active_theta)];
            let i = categorical(&mut rng, &phi[s]);
            let j = categorical(&mut rng, &phi[r]);
            touched[i] = true;
            touched[j] = true;
            edges.push((i, j));
            pairs.push((s, r));
        }
        if !cfg.require_all_nodes || touched.iter().all(|&t| t) {
            break (active, active_theta, phi, edges, pairs);
        }
        if attempt == MAX_ATTEMPTS {
            return Err(Error::InvalidArgument(format!(
                "no draw touched every node after {MAX_ATTEMPTS} attempts; raise phi_concentration or num_edges"
            )));
        }
    };

    let mut roles = vec![vec![0.0; k]; m];
    for (&(i, j), &(s, r)) in raw_edges.iter().zip(&pairs) {
        roles[i][s] += 1.0;
        roles[j][r] += 1.0;
    }
    let counts = word_counts(&mut rng, cfg);
    let uniform = vec![1.0; k];
    let mut raw_docs = Vec::with_capacity(m);
    let mut raw_topics = Vec::with_capacity(m);
    for i in 0..m {
        let weights = if roles[i].iter().any(|&v| v > 0.0) { &roles[i] } else { &uniform };
        let mut doc = Vec::with_capacity(counts[i]);
        let mut topics = Vec::with_capacity(counts[i]);
        for _ in 0..counts[i] {
            let topic = categorical(&mut rng, weights);
            doc.push(categorical(&mut rng, &psi[topic]));
            topics.push(topic);
        }
        raw_docs.push(doc);
        raw_topics.push(topics);
    }

    // hide the generation order: shuffle links and node ids
    let mut order: Vec<usize> = (0..raw_edges.len()).collect();
    order.shuffle(&mut rng);
    let mut node_perm: Vec<usize> = (0..m).collect();
    node_perm.shuffle(&mut rng);

    // renumber nodes by first appearance in the shuffled edge list, then the rest
    let mut node_id: Vec<Option<usize>> = vec![None; m];
    let mut next = 0;
    for &e in &order {
        let (i, j) = raw_edges[e];
        for v in [node_perm[i], node_perm[j]] {
            if node_id[v].is_none() {
                node_id[v] = Some(next);
                next += 1;
            }
        }
    }
    for slot in node_id.iter_mut() {
        if slot.is_none() {
            *slot = Some(next);
            next += 1;
        }
    }
    let new_id = |raw: usize| node_id[node_perm[raw]].expect("assigned");
    let edges: Vec<Pair> = order.iter().map(|&e| (new_id(raw_edges[e].0), new_id(raw_edges[e].1))).collect();
    let edge_pairs: Vec<Pair> = order.iter().map(|&e| pairs[e]).collect();
    let labels: Vec<String> = (0..m).map(|i| format!("n{i}")).collect();

    let mut docs = vec![Vec::new(); m];
    let mut word_topics = vec![Vec::new(); m];
    let mut new_phi = vec![vec![0.0; m]; k];
    for raw in 0..m {
        let id = new_id(raw);
        docs[id] = std::mem::take(&mut raw_docs[raw]);
        word_topics[id] = std::mem::take(&mut raw_topics[raw]);
        for x in 0..k {
            new_phi[x][id] = phi[x][raw];
        }
    }

    // renumber words by first appearance in node order, unseen words last
    let mut word_id: HashMap<usize, usize> = HashMap::new();
    for doc in &docs {
        for &w in doc {
            let n = word_id.len();
            word_id.entry(w).or_insert(n);
        }
    }
    for w in 0..cfg.vocab_size {
        let n = word_id.len();
        word_id.entry(w).or_insert(n);
    }
    for doc in &mut docs {
        for w in doc.iter_mut() {
            *w = word_id[w];
        }
    }
    let mut vocabulary = vec![String::new(); cfg.vocab_size];
    let mut new_psi = vec![vec![0.0; cfg.vocab_size]; k];
    for (&raw, &id) in &word_id {
        vocabulary[id] = format!("w{raw}");
        for x in 0..k {
            new_psi[x][id] = psi[x][raw];
        }
    }

    let mut theta = vec![vec![0.0; k]; k];
    for (&(s, r), &p) in active.iter().zip(&active_theta) {
        theta[s][r] = p;
    }
    Ok(SynthData {
        edges: EdgeList::with_labels(edges, labels)?,
        corpus: NodeCorpus::new(docs, vocabulary)?,
        truth: GroundTruth {
            k,
            active_pairs: active,
            edge_pairs,
            word_topics,
            theta,
            phi: new_phi,
            psi: new_psi,
        },
    })
}
