//! Reference implementations written from the model definitions, used to
//! check the sampler without sharing any of its code.

#![allow(dead_code)]

use std::collections::HashMap;

use blocktext::corpus::{EdgeList, NodeCorpus};
use blocktext::rng::{stream_rng, Stream};
use blocktext::sampler::{GibbsState, Model, ModelConfig, TextCoupling};

pub type Pair = (usize, usize);

/// Log marginal of counts under a symmetric Dirichlet, as the product of
/// sequential urn predictives `(n_x + a) / (n + len·a)`.
pub fn polya(counts: &[u64], a: f64) -> f64 {
    let len = counts.len() as f64;
    let mut lp = 0.0;
    let mut seen = 0u64;
    for &c in counts {
        for t in 0..c {
            lp += (t as f64 + a).ln() - (seen as f64 + len * a).ln();
            seen += 1;
        }
    }
    lp
}

/// Unnormalized exchangeable prior over pair counts, with every Gamma ratio
/// expanded as a rising product.
pub fn crp_joint(pair_counts: &[u64], k: usize, alpha: f64, eta: f64) -> f64 {
    let n: u64 = pair_counts.iter().sum();
    let mut lp = 0.0;
    for &c in pair_counts {
        lp += (0..c).map(|t| (t as f64 + alpha).ln()).sum::<f64>();
    }
    lp -= (0..n).map(|t| (t as f64 + eta).ln()).sum::<f64>();
    lp += k as f64 * (eta / alpha).ln();
    lp -= (1..=k).map(|j| ((2 * j - 1) as f64).ln()).sum::<f64>();
    lp
}

/// Collapsed log joint of a full assignment, up to a data-only constant.
pub fn reference_log_joint(
    cfg: &ModelConfig,
    k: usize,
    edges: &[Pair],
    docs: &[Vec<usize>],
    vocab: usize,
    z: &[Pair],
    r: &[Vec<usize>],
) -> f64 {
    let m = docs.len();
    let mut pairs = vec![0u64; k * k];
    let mut role = vec![vec![0u64; m]; k];
    for (&(i, j), &(s, t)) in edges.iter().zip(z) {
        pairs[s * k + t] += 1;
        role[s][i] += 1;
        role[t][j] += 1;
    }
    let mut topic_word = vec![vec![0u64; vocab]; k];
    let mut doc_topic = vec![vec![0u64; k]; m];
    for (i, doc) in docs.iter().enumerate() {
        for (&w, &x) in doc.iter().zip(&r[i]) {
            topic_word[x][w] += 1;
            doc_topic[i][x] += 1;
        }
    }
    let model = cfg.model;
    let mut lp = 0.0;
    if model.uses_edges() {
        lp += if model == Model::InfSbt {
            crp_joint(&pairs, k, cfg.alpha, cfg.eta)
        } else {
            polya(&pairs, cfg.alpha)
        };
    }
    if matches!(model, Model::Sb | Model::Sbt | Model::InfSbt) {
        lp += role.iter().map(|row| polya(row, cfg.beta)).sum::<f64>();
    }
    if model.uses_words() {
        lp += topic_word.iter().map(|row| polya(row, cfg.gamma)).sum::<f64>();
    }
    match model {
        Model::Sbt | Model::InfSbt => {
            // words pick topics from the smoothed share of the node's roles
            for i in 0..m {
                let degree: u64 = (0..k).map(|x| role[x][i]).sum();
                for x in 0..k {
                    let share = match cfg.coupling {
                        TextCoupling::Corrected => {
                            (role[x][i] as f64 + cfg.beta) / (degree as f64 + k as f64 * cfg.beta)
                        }
                        TextCoupling::Uncorrected => role[x][i] as f64 + cfg.beta,
                    };
                    lp += doc_topic[i][x] as f64 * share.ln();
                }
            }
        }
        Model::RevSbt => {
            lp += doc_topic.iter().map(|row| polya(row, cfg.gamma)).sum::<f64>();
            // each endpoint drawn from the smoothed word share of its industry
            for x in 0..k {
                let total: u64 = (0..m).map(|i| doc_topic[i][x]).sum();
                for i in 0..m {
                    let p = (doc_topic[i][x] as f64 + cfg.beta) / (total as f64 + m as f64 * cfg.beta);
                    lp += role[x][i] as f64 * p.ln();
                }
            }
        }
        Model::Lda => {
            lp += doc_topic.iter().map(|row| polya(row, cfg.gamma)).sum::<f64>();
        }
        Model::Sb => {}
    }
    lp
}

/// A three-node toy instance: three links and four word positions.
pub fn toy() -> (EdgeList, NodeCorpus) {
    let edges = EdgeList::new(vec![(0, 1), (1, 2), (0, 2)], 3).unwrap();
    let corpus = NodeCorpus::new(vec![vec![0, 1], vec![1], vec![0]], vec!["a".into(), "b".into()]).unwrap();
    (edges, corpus)
}

/// Mixed-radix code of an assignment: edge pairs in base `k²`, then word
/// topics in base `k`. Models that ignore a side contribute nothing for it.
pub fn encode(model: Model, k: usize, z: &[Pair], r: &[Vec<usize>]) -> u64 {
    let mut code = 0u64;
    if model.uses_edges() {
        for &(s, t) in z {
            code = code * (k * k) as u64 + (s * k + t) as u64;
        }
    }
    if model.uses_words() {
        for &x in r.iter().flatten() {
            code = code * k as u64 + x as u64;
        }
    }
    code
}

/// Every assignment of a finite model on the given data.
pub fn enumerate(model: Model, k: usize, num_edges: usize, doc_lens: &[usize]) -> Vec<(Vec<Pair>, Vec<Vec<usize>>)> {
    let ne = if model.uses_edges() { num_edges } else { 0 };
    let nw: usize = if model.uses_words() { doc_lens.iter().sum() } else { 0 };
    let total = (k * k).pow(ne as u32) * k.pow(nw as u32);
    let mut out = Vec::with_capacity(total);
    for mut code in 0..total {
        let mut words = vec![0usize; nw];
        for w in words.iter_mut().rev() {
            *w = code % k;
            code /= k;
        }
        let mut z = vec![(0, 0); ne];
        for p in z.iter_mut().rev() {
            let c = code % (k * k);
            *p = (c / k, c % k);
            code /= k * k;
        }
        let mut r = Vec::with_capacity(doc_lens.len());
        let mut it = words.into_iter();
        for &len in doc_lens {
            r.push(if model.uses_words() { it.by_ref().take(len).collect() } else { Vec::new() });
        }
        out.push((z, r));
    }
    out
}

/// Exact posterior over assignment codes by brute-force enumeration.
pub fn exact_posterior(cfg: &ModelConfig, edges: &EdgeList, corpus: &NodeCorpus) -> HashMap<u64, f64> {
    let k = cfg.k;
    let lens: Vec<usize> = corpus.docs().iter().map(Vec::len).collect();
    let states = enumerate(cfg.model, k, edges.len(), &lens);
    let logs: Vec<f64> = states
        .iter()
        .map(|(z, r)| reference_log_joint(cfg, k, edges.edges(), corpus.docs(), corpus.vocab_size(), z, r))
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    states
        .iter()
        .zip(&logs)
        .map(|((z, r), l)| (encode(cfg.model, k, z, r), (l - max).exp() / total))
        .collect()
}

/// Total-variation distance between the sampler's visit frequencies over
/// `sweeps` sweeps (after `burn_in`) and the exact posterior.
pub fn gibbs_tv(cfg: &ModelConfig, edges: &EdgeList, corpus: &NodeCorpus, burn_in: u64, sweeps: u64) -> f64 {
    let exact = exact_posterior(cfg, edges, corpus);
    let mut state = GibbsState::init(cfg, edges, corpus).unwrap();
    let mut rng = stream_rng(cfg.seed, Stream::Sweep(0));
    for _ in 0..burn_in {
        state.sweep(cfg, &mut rng);
    }
    let mut visits: HashMap<u64, u64> = HashMap::new();
    for _ in 0..sweeps {
        state.sweep(cfg, &mut rng);
        *visits.entry(encode(cfg.model, cfg.k, state.edge_assignments(), state.word_topics())).or_default() += 1;
    }
    let n = sweeps as f64;
    let mut tv = 0.0;
    for (code, p) in &exact {
        let q = visits.get(code).copied().unwrap_or(0) as f64 / n;
        tv += (p - q).abs();
    }
    let outside: u64 = visits.iter().filter(|(c, _)| !exact.contains_key(c)).map(|(_, v)| v).sum();
    0.5 * (tv + outside as f64 / n)
}
