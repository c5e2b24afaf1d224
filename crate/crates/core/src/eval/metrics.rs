//! Partition comparison, link ranking and held-out word metrics.

use std::collections::{BTreeMap, HashSet};

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use rand::Rng as _;

use crate::corpus::{EdgeList, HeldOutWord};
use crate::crp2d::Pair;
use crate::error::{invalid, Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::sampler::PosteriorEstimate;

fn entropy<'a, I: IntoIterator<Item = &'a usize>>(counts: I, n: f64) -> f64 {
    counts
        .into_iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Variation of information between two labelings, in nats.
pub fn variation_of_information<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Ord,
    B: Ord,
{
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let n = a.len() as f64;
    let mut ca: BTreeMap<&A, usize> = BTreeMap::new();
    let mut cb: BTreeMap<&B, usize> = BTreeMap::new();
    let mut joint: BTreeMap<(&A, &B), usize> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
        *joint.entry((x, y)).or_default() += 1;
    }
    // VI = 2 H(A,B) - H(A) - H(B)
    let vi = 2.0 * entropy(joint.values(), n) - entropy(ca.values(), n) - entropy(cb.values(), n);
    Ok(vi.max(0.0))
}

fn check_labels(labels: &[usize], allowed: usize) -> Result<()> {
    match labels.iter().find(|&&l| l >= allowed) {
        Some(&label) => Err(Error::TooManyClusters { label, allowed }),
        None => Ok(()),
    }
}

/// Items left mismatched by the best one-to-one relabeling, from a square
/// contingency table of (true, estimated) counts.
fn unmatched(table: Vec<i64>, k: usize, total: i64) -> i64 {
    let matrix = Matrix::from_vec(k, k, table).expect("square table");
    let (matched, _) = kuhn_munkres(&matrix);
    total - matched
}

/// Minimum number of mismatched items over all bijective relabelings of the
/// estimate. Both labelings must use labels below `k`.
pub fn absolute_error(truth: &[usize], est: &[usize], k: usize) -> Result<usize> {
    if truth.len() != est.len() {
        return Err(Error::LengthMismatch(truth.len(), est.len()));
    }
    if truth.is_empty() {
        return Ok(0);
    }
    check_labels(truth, k)?;
    check_labels(est, k)?;
    let mut table = vec![0i64; k * k];
    for (&t, &e) in truth.iter().zip(est) {
        table[t * k + e] += 1;
    }
    Ok(unmatched(table, k, truth.len() as i64) as usize)
}

/// Absolute error for industry pairs: one relabeling of industries acts on
/// both ends, and each mismatched end counts once (so the maximum is twice
/// the number of links).
pub fn absolute_error_pairs(truth: &[Pair], est: &[Pair], k: usize) -> Result<usize> {
    let flat = |pairs: &[Pair]| -> Vec<usize> { pairs.iter().flat_map(|&(s, r)| [s, r]).collect() };
    if truth.len() != est.len() {
        return Err(Error::LengthMismatch(truth.len(), est.len()));
    }
    absolute_error(&flat(truth), &flat(est), k)
}

/// Anything that assigns a score to every ordered node pair.
pub trait LinkScorer: Sync {
    fn num_nodes(&self) -> usize;
    /// Row-major `m×m` scores; higher means more likely linked.
    fn link_scores(&self, exec: crate::par::Execution) -> Vec<f64>;
}

impl LinkScorer for PosteriorEstimate {
    fn num_nodes(&self) -> usize {
        PosteriorEstimate::num_nodes(self)
    }

    fn link_scores(&self, exec: crate::par::Execution) -> Vec<f64> {
        self.score_matrix(exec)
    }
}

/// Baseline with independent uniform random scores.
#[derive(Debug, Clone, Copy)]
pub struct NullScorer {
    pub num_nodes: usize,
    pub seed: u64,
    pub stream: u64,
}

impl LinkScorer for NullScorer {
    fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    fn link_scores(&self, _exec: crate::par::Execution) -> Vec<f64> {
        let mut rng = stream_rng(self.seed, Stream::NullModel(self.stream));
        (0..self.num_nodes * self.num_nodes).map(|_| rng.random::<f64>()).collect()
    }
}

/// Candidate ordered pairs, row-major indices.
fn candidates(m: usize, self_loops: bool) -> impl Iterator<Item = usize> {
    (0..m * m).filter(move |&idx| self_loops || idx / m != idx % m)
}

/// Mean rank (1 = best) of the test links among all candidate pairs, ties
/// sharing the mean of their rank range.
pub fn rank_score(scores: &[f64], m: usize, test: &EdgeList, self_loops: bool) -> Result<f64> {
    if scores.len() != m * m {
        return Err(Error::LengthMismatch(scores.len(), m * m));
    }
    if test.is_empty() {
        return Err(invalid("rank score needs at least one test link"));
    }
    let mut sorted: Vec<f64> = candidates(m, self_loops).map(|idx| scores[idx]).collect();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let mut total = 0.0;
    for &(i, j) in test.edges() {
        if i >= m || j >= m {
            return Err(invalid(format!("test link ({i}, {j}) outside {m} nodes")));
        }
        let v = scores[i * m + j];
        let below = sorted.partition_point(|&x| x < v);
        let upto = sorted.partition_point(|&x| x <= v);
        let above = n - upto;
        let ties = upto - below;
        total += above as f64 + (ties as f64 + 1.0) / 2.0;
    }
    Ok(total / test.len() as f64)
}

/// Draws `count` distinct ordered pairs linked in neither edge list.
pub fn sample_negatives(
    m: usize,
    linked: &[&EdgeList],
    count: usize,
    self_loops: bool,
    seed: u64,
    stream: u64,
) -> Result<Vec<Pair>> {
    let taken: HashSet<Pair> = linked.iter().flat_map(|el| el.edges().iter().copied()).collect();
    let free: usize = candidates(m, self_loops).filter(|&idx| !taken.contains(&(idx / m, idx % m))).count();
    if count == 0 {
        return Err(invalid("need at least one negative"));
    }
    if free < count {
        return Err(invalid(format!("only {free} unlinked pairs available, {count} requested")));
    }
    let mut rng = stream_rng(seed, Stream::Negatives(stream));
    if count * 2 > free {
        let mut pool: Vec<Pair> = candidates(m, self_loops)
            .map(|idx| (idx / m, idx % m))
            .filter(|p| !taken.contains(p))
            .collect();
        let (chosen, _) = rand::seq::SliceRandom::partial_shuffle(&mut pool[..], &mut rng, count);
        return Ok(chosen.to_vec());
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = (rng.random_range(0..m), rng.random_range(0..m));
        if (!self_loops && p.0 == p.1) || taken.contains(&p) || !seen.insert(p) {
            continue;
        }
        out.push(p);
    }
    Ok(out)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auc(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(invalid("AUC needs positives and negatives"));
    }
    let mut neg = negatives.to_vec();
    neg.sort_unstable_by(f64::total_cmp);
    let mut wins = 0.0;
    for &p in positives {
        let below = neg.partition_point(|&x| x < p);
        let upto = neg.partition_point(|&x| x <= p);
        wins += below as f64 + 0.5 * (upto - below) as f64;
    }
    Ok(wins / (positives.len() as f64 * neg.len() as f64))
}

/// AUC of test links against sampled unlinked pairs.
pub fn auc_link_prediction(scores: &[f64], m: usize, test: &EdgeList, negatives: &[Pair]) -> Result<f64> {
    if scores.len() != m * m {
        return Err(Error::LengthMismatch(scores.len(), m * m));
    }
    let pos: Vec<f64> = test.edges().iter().map(|&(i, j)| scores[i * m + j]).collect();
    let neg: Vec<f64> = negatives.iter().map(|&(i, j)| scores[i * m + j]).collect();
    auc(&pos, &neg)
}

/// Σ log Σ_k x[i][k]·ψ[k][w] over held-out words.
pub fn heldout_word_ll(estimate: &PosteriorEstimate, test: &[HeldOutWord]) -> f64 {
    test.iter().map(|h| estimate.word_prob(h.node, h.word).ln()).sum()
}
