use rand::Rng;

use super::{Model, ModelConfig};
use crate::corpus::{EdgeList, NodeCorpus};
use crate::crp2d::{Pair, PairCounts};
use crate::error::{invalid, Error, Result};
use crate::rng::{stream_rng, Stream};

/// Assignments and the count tables derived from them.
///
/// Role counts `q1[k][i]`/`q2[k][i]` count the edges in which node `i`
/// sends/receives as industry `k`; `role[k][i]` is their sum. `c[k][w]` are
/// topic-word counts and `doc_topic[i][k]` per-node topic counts.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    pub(super) model: Model,
    pub(super) k: usize,
    pub(super) m: usize,
    pub(super) w: usize,
    pub(super) edges: Vec<Pair>,
    pub(super) docs: Vec<Vec<usize>>,
    pub(super) z: Vec<Pair>,
    pub(super) r: Vec<Vec<usize>>,
    /// Row-major `k×k` pair counts.
    pub(super) n_pair: Vec<u32>,
    pub(super) q1: Vec<Vec<u32>>,
    pub(super) q2: Vec<Vec<u32>>,
    pub(super) role: Vec<Vec<u32>>,
    pub(super) role_total: Vec<u32>,
    /// Σ_k role[k][i]: the number of edge endpoints at node `i`.
    pub(super) degree: Vec<u32>,
    pub(super) c: Vec<Vec<u32>>,
    pub(super) c_total: Vec<u32>,
    pub(super) doc_topic: Vec<Vec<u32>>,
    /// Bitset of nonzero `n_pair` cells, `nz_words` u64 words per row.
    pub(super) nz_bits: Vec<u64>,
    pub(super) nz_words: usize,
}

impl GibbsState {
    fn empty(model: Model, k: usize, edges: &EdgeList, corpus: &NodeCorpus) -> Result<Self> {
        let m = if model.uses_edges() {
            edges.num_nodes()
        } else {
            corpus.num_nodes().max(edges.num_nodes())
        };
        if model.uses_words() && model.uses_edges() && corpus.num_nodes() != m {
            return Err(invalid(format!(
                "corpus covers {} nodes but the edge list has {m}",
                corpus.num_nodes()
            )));
        }
        let (state_edges, docs) = match model {
            Model::Sb => (edges.edges().to_vec(), vec![Vec::new(); m]),
            Model::Lda => {
                let mut docs = corpus.docs().to_vec();
                docs.resize(m, Vec::new());
                (Vec::new(), docs)
            }
            _ => (edges.edges().to_vec(), corpus.docs().to_vec()),
        };
        let w = if model.uses_words() { corpus.vocab_size() } else { 0 };
        Ok(Self {
            model,
            k,
            m,
            w,
            z: Vec::with_capacity(state_edges.len()),
            r: docs.iter().map(|d| Vec::with_capacity(d.len())).collect(),
            edges: state_edges,
            n_pair: vec![0; k * k],
            q1: vec![vec![0; m]; k],
            q2: vec![vec![0; m]; k],
            role: vec![vec![0; m]; k],
            role_total: vec![0; k],
            degree: vec![0; m],
            c: vec![vec![0; w]; k],
            c_total: vec![0; k],
            doc_topic: docs.iter().map(|_| vec![0; k]).collect(),
            docs,
            nz_bits: vec![0; k * k.div_ceil(64)],
            nz_words: k.div_ceil(64),
        })
    }

    /// Random initial state: uniform pairs for edges, uniform topics for
    /// words. For `InfSbt`, industries left without edges are retired before
    /// words are placed.
    pub fn init(config: &ModelConfig, edges: &EdgeList, corpus: &NodeCorpus) -> Result<Self> {
        config.validate()?;
        if config.model.is_infinite() && edges.is_empty() {
            return Err(invalid("InfSBT needs at least one edge"));
        }
        let mut rng = stream_rng(config.seed, Stream::Init);
        let mut state = Self::empty(config.model, config.k, edges, corpus)?;
        let k = state.k;
        for e in 0..state.edges.len() {
            let pair = (rng.random_range(0..k), rng.random_range(0..k));
            state.z.push(pair);
            state.add_edge(e, pair);
        }
        if config.model.is_infinite() {
            state.compact();
        }
        let k = state.k;
        for i in 0..state.m {
            for t in 0..state.docs[i].len() {
                let topic = rng.random_range(0..k);
                state.r[i].push(topic);
                state.add_word(i, t, topic);
            }
        }
        Ok(state)
    }

    /// Rebuilds a state from explicit assignments (used for resume and for
    /// exhaustive checks on small instances).
    pub fn from_assignments(
        config: &ModelConfig,
        edges: &EdgeList,
        corpus: &NodeCorpus,
        k: usize,
        z: &[Pair],
        r: &[Vec<usize>],
    ) -> Result<Self> {
        config.validate()?;
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        let mut state = Self::empty(config.model, k, edges, corpus)?;
        if z.len() != state.edges.len() {
            return Err(Error::LengthMismatch(z.len(), state.edges.len()));
        }
        for (e, &pair) in z.iter().enumerate() {
            if pair.0 >= k || pair.1 >= k {
                return Err(Error::InvalidState(format!("edge {e} assigned {pair:?} with k={k}")));
            }
            state.z.push(pair);
            state.add_edge(e, pair);
        }
        let expected_words = if config.model.uses_words() {
            state.docs.clone()
        } else {
            vec![Vec::new(); state.m]
        };
        if r.len() != state.m && !(r.is_empty() && !config.model.uses_words()) {
            return Err(Error::LengthMismatch(r.len(), state.m));
        }
        for (i, doc) in expected_words.iter().enumerate() {
            let topics = r.get(i).map(Vec::as_slice).unwrap_or(&[]);
            if topics.len() != doc.len() {
                return Err(Error::InvalidState(format!(
                    "node {i} has {} words but {} topics",
                    doc.len(),
                    topics.len()
                )));
            }
            for (t, &topic) in topics.iter().enumerate() {
                if topic >= k {
                    return Err(Error::InvalidState(format!("word ({i}, {t}) topic {topic} >= k={k}")));
                }
                state.r[i].push(topic);
                state.add_word(i, t, topic);
            }
        }
        Ok(state)
    }

    pub fn model(&self) -> Model {
        self.model
    }

    /// Current number of industries (topics).
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_nodes(&self) -> usize {
        self.m
    }

    pub fn vocab_size(&self) -> usize {
        self.w
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_assignments(&self) -> &[Pair] {
        &self.z
    }

    pub fn word_topics(&self) -> &[Vec<usize>] {
        &self.r
    }

    pub fn pair_count(&self, s: usize, r: usize) -> u32 {
        self.n_pair[s * self.k + r]
    }

    pub fn pair_counts(&self) -> PairCounts {
        PairCounts::from_pairs(self.k, self.z.iter().copied()).expect("assignments within k")
    }

    pub fn sender_count(&self, k: usize, i: usize) -> u32 {
        self.q1[k][i]
    }

    pub fn receiver_count(&self, k: usize, i: usize) -> u32 {
        self.q2[k][i]
    }

    pub fn topic_word_count(&self, k: usize, w: usize) -> u32 {
        self.c[k][w]
    }

    pub fn doc_topic_count(&self, i: usize, k: usize) -> u32 {
        self.doc_topic[i][k]
    }

    /// Number of links touching industry `k` (a link with both ends in `k`
    /// counts once).
    pub fn incident_links(&self, k: usize) -> u64 {
        (0..self.k)
            .map(|j| {
                let out = self.pair_count(k, j) as u64;
                if j == k {
                    out
                } else {
                    out + self.pair_count(j, k) as u64
                }
            })
            .sum()
    }

    pub(super) fn add_edge(&mut self, e: usize, (s, r): Pair) {
        let (i, j) = self.edges[e];
        let cell = &mut self.n_pair[s * self.k + r];
        *cell += 1;
        if *cell == 1 {
            self.nz_bits[s * self.nz_words + r / 64] |= 1 << (r % 64);
        }
        self.q1[s][i] += 1;
        self.q2[r][j] += 1;
        self.role[s][i] += 1;
        self.role[r][j] += 1;
        self.role_total[s] += 1;
        self.role_total[r] += 1;
        self.degree[i] += 1;
        self.degree[j] += 1;
    }

    pub(super) fn remove_edge(&mut self, e: usize) {
        let (i, j) = self.edges[e];
        let (s, r) = self.z[e];
        let cell = &mut self.n_pair[s * self.k + r];
        *cell -= 1;
        if *cell == 0 {
            self.nz_bits[s * self.nz_words + r / 64] &= !(1 << (r % 64));
        }
        self.q1[s][i] -= 1;
        self.q2[r][j] -= 1;
        self.role[s][i] -= 1;
        self.role[r][j] -= 1;
        self.role_total[s] -= 1;
        self.role_total[r] -= 1;
        self.degree[i] -= 1;
        self.degree[j] -= 1;
    }

    pub(super) fn add_word(&mut self, i: usize, t: usize, topic: usize) {
        let w = self.docs[i][t];
        self.c[topic][w] += 1;
        self.c_total[topic] += 1;
        self.doc_topic[i][topic] += 1;
    }

    pub(super) fn remove_word(&mut self, i: usize, t: usize) {
        let w = self.docs[i][t];
        let topic = self.r[i][t];
        self.c[topic][w] -= 1;
        self.c_total[topic] -= 1;
        self.doc_topic[i][topic] -= 1;
    }

    /// Appends an empty industry.
    pub(super) fn grow(&mut self) {
        let old = self.k;
        let k = old + 1;
        let mut n_pair = vec![0; k * k];
        for s in 0..old {
            n_pair[s * k..s * k + old].copy_from_slice(&self.n_pair[s * old..(s + 1) * old]);
        }
        self.n_pair = n_pair;
        self.q1.push(vec![0; self.m]);
        self.q2.push(vec![0; self.m]);
        self.role.push(vec![0; self.m]);
        self.role_total.push(0);
        self.c.push(vec![0; self.w]);
        self.c_total.push(0);
        for row in &mut self.doc_topic {
            row.push(0);
        }
        self.k = k;
        self.rebuild_nonzero();
    }

    pub(super) fn rebuild_nonzero(&mut self) {
        let k = self.k;
        self.nz_words = k.div_ceil(64);
        self.nz_bits = vec![0; k * self.nz_words];
        for s in 0..k {
            for r in 0..k {
                if self.n_pair[s * k + r] > 0 {
                    self.nz_bits[s * self.nz_words + r / 64] |= 1 << (r % 64);
                }
            }
        }
    }

    /// Retires industries with no edge roles and no words, relabelling the
    /// survivors densely in ascending order of their old labels. Returns the
    /// number retired.
    pub(super) fn compact(&mut self) -> usize {
        let keep: Vec<usize> = (0..self.k)
            .filter(|&k| self.role_total[k] > 0 || self.c_total[k] > 0)
            .collect();
        let retired = self.k - keep.len();
        if retired == 0 {
            return 0;
        }
        let mut new_label = vec![usize::MAX; self.k];
        for (new, &old) in keep.iter().enumerate() {
            new_label[old] = new;
        }
        let old_k = self.k;
        let k = keep.len();
        let mut n_pair = vec![0; k * k];
        for (ns, &os) in keep.iter().enumerate() {
            for (nr, &or) in keep.iter().enumerate() {
                n_pair[ns * k + nr] = self.n_pair[os * old_k + or];
            }
        }
        self.n_pair = n_pair;
        let pick = |rows: &mut Vec<Vec<u32>>| {
            let old = std::mem::take(rows);
            *rows = old
                .into_iter()
                .enumerate()
                .filter(|(i, _)| new_label[*i] != usize::MAX)
                .map(|(_, r)| r)
                .collect();
        };
        pick(&mut self.q1);
        pick(&mut self.q2);
        pick(&mut self.role);
        pick(&mut self.c);
        self.role_total = keep.iter().map(|&o| self.role_total[o]).collect();
        self.c_total = keep.iter().map(|&o| self.c_total[o]).collect();
        for row in &mut self.doc_topic {
            *row = keep.iter().map(|&o| row[o]).collect();
        }
        for pair in &mut self.z {
            *pair = (new_label[pair.0], new_label[pair.1]);
        }
        for topics in &mut self.r {
            for t in topics.iter_mut() {
                *t = new_label[*t];
            }
        }
        self.k = k;
        self.rebuild_nonzero();
        retired
    }

    /// Recomputes every table from the assignments and compares.
    pub fn check_invariants(&self) -> Result<()> {
        let k = self.k;
        let mut fresh = Self {
            n_pair: vec![0; k * k],
            q1: vec![vec![0; self.m]; k],
            q2: vec![vec![0; self.m]; k],
            role: vec![vec![0; self.m]; k],
            role_total: vec![0; k],
            degree: vec![0; self.m],
            c: vec![vec![0; self.w]; k],
            c_total: vec![0; k],
            doc_topic: self.docs.iter().map(|_| vec![0; k]).collect(),
            nz_bits: vec![0; self.nz_bits.len()],
            ..self.clone()
        };
        for e in 0..self.z.len() {
            let pair = self.z[e];
            if pair.0 >= k || pair.1 >= k {
                return Err(Error::InvalidState(format!("edge {e} label out of range")));
            }
            fresh.add_edge(e, pair);
        }
        for i in 0..self.m {
            for t in 0..self.r[i].len() {
                if self.r[i][t] >= k {
                    return Err(Error::InvalidState(format!("word ({i}, {t}) label out of range")));
                }
                fresh.add_word(i, t, self.r[i][t]);
            }
        }
        let tables_match = fresh.n_pair == self.n_pair
            && fresh.q1 == self.q1
            && fresh.q2 == self.q2
            && fresh.role == self.role
            && fresh.role_total == self.role_total
            && fresh.degree == self.degree
            && fresh.c == self.c
            && fresh.c_total == self.c_total
            && fresh.doc_topic == self.doc_topic
            && fresh.nz_bits == self.nz_bits;
        if !tables_match {
            return Err(Error::InvalidState("count tables disagree with assignments".into()));
        }
        let n: u64 = self.n_pair.iter().map(|&x| x as u64).sum();
        if n != self.z.len() as u64 {
            return Err(Error::InvalidState("pair counts do not sum to N_l".into()));
        }
        for (i, doc) in self.docs.iter().enumerate() {
            let expected = if self.model.uses_words() { doc.len() } else { 0 };
            let sum: u64 = self.doc_topic[i].iter().map(|&x| x as u64).sum();
            if sum != expected as u64 {
                return Err(Error::InvalidState(format!("node {i} topic counts do not sum to T_i")));
            }
        }
        if self.model.is_infinite() {
            if let Some(empty) = (0..k).find(|&j| self.role_total[j] == 0) {
                return Err(Error::InvalidState(format!("industry {empty} has no edges")));
            }
        }
        Ok(())
    }

    pub(super) fn doc_len(&self, i: usize) -> usize {
        if self.model.uses_words() {
            self.docs[i].len()
        } else {
            0
        }
    }
}
