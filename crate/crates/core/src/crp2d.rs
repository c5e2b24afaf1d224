//! Two-dimensional Chinese restaurant process over ordered industry pairs.
//!
//! Links arrive one at a time. With `N` links seen and `K` industries
//! open, the next link opens a new industry with probability `η/(N+η)` and
//! then picks uniformly among the `2K+1` pairs that involve it; otherwise it
//! picks pair `z` among the `K²` existing-industry pairs with probability
//! `(n_z+α)/(K²α+N)`. The first link always opens industry 0 as pair (0,0).
//!
//! The exact sequential probability is not exchangeable. For ratios and
//! comparisons we use the exchangeable approximation over pair counts
//! (see [`approx_joint_log_prob`]), whose normalizing constant is never
//! computed.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::par::{self, Execution};
use crate::rng::{stream_rng, Stream};

pub type Pair = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crp2dParams {
    /// Concentration for new pairs among existing industries.
    pub alpha: f64,
    /// Concentration for new industries.
    pub eta: f64,
}

impl Crp2dParams {
    pub fn new(alpha: f64, eta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) || !(eta > 0.0 && eta.is_finite()) {
            return Err(invalid(format!(
                "alpha and eta must be positive, got alpha={alpha} eta={eta}"
            )));
        }
        Ok(Self { alpha, eta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CreationEvent {
    Existing,
    NewPair,
    NewIndustry,
}

/// Ordered pair assignments with the creation event behind each one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawTrace")]
pub struct Crp2dTrace {
    pairs: Vec<Pair>,
    events: Vec<CreationEvent>,
}

#[derive(Deserialize)]
struct RawTrace {
    pairs: Vec<Pair>,
    events: Vec<CreationEvent>,
}

impl TryFrom<RawTrace> for Crp2dTrace {
    type Error = Error;

    fn try_from(raw: RawTrace) -> Result<Self> {
        let trace = Crp2dTrace::from_pairs(raw.pairs)?;
        if trace.events != raw.events {
            return Err(Error::InvalidTrace(
                "events disagree with the pair sequence".into(),
            ));
        }
        Ok(trace)
    }
}

impl Crp2dTrace {
    /// Builds a trace from its pair sequence, deriving the events and
    /// checking that industries are opened densely, one per step.
    pub fn from_pairs(pairs: Vec<Pair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidTrace("empty trace".into()));
        }
        if pairs[0] != (0, 0) {
            return Err(Error::InvalidTrace(format!(
                "first pair must be (0, 0), got {:?}",
                pairs[0]
            )));
        }
        let mut events = Vec::with_capacity(pairs.len());
        let mut k = 0usize;
        let mut seen: HashMap<Pair, ()> = HashMap::new();
        for (t, &(s, r)) in pairs.iter().enumerate() {
            let top = s.max(r);
            let event = if top == k {
                k += 1;
                CreationEvent::NewIndustry
            } else if top > k {
                return Err(Error::InvalidTrace(format!(
                    "step {}: pair ({s}, {r}) skips an industry (only {k} open)",
                    t + 1
                )));
            } else if seen.contains_key(&(s, r)) {
                CreationEvent::Existing
            } else {
                CreationEvent::NewPair
            };
            seen.insert((s, r), ());
            events.push(event);
        }
        Ok(Self { pairs, events })
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn events(&self) -> &[CreationEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Number of industries after each step.
    pub fn industry_counts(&self) -> Vec<usize> {
        let mut k = 0;
        self.events
            .iter()
            .map(|e| {
                if *e == CreationEvent::NewIndustry {
                    k += 1;
                }
                k
            })
            .collect()
    }

    pub fn counts(&self) -> PairCounts {
        let k = self.industry_counts().last().copied().unwrap_or(0);
        let mut counts = PairCounts::zeros(k);
        for &(s, r) in &self.pairs {
            counts.increment(s, r);
        }
        counts
    }
}

/// Dense `K×K` table of link counts per (sender, receiver) industry pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairCounts {
    k: usize,
    counts: Vec<u64>,
    total: u64,
}

impl PairCounts {
    pub fn zeros(k: usize) -> Self {
        Self {
            k,
            counts: vec![0; k * k],
            total: 0,
        }
    }

    pub fn from_pairs<I: IntoIterator<Item = Pair>>(k: usize, pairs: I) -> Result<Self> {
        let mut counts = Self::zeros(k);
        for (s, r) in pairs {
            if s >= k || r >= k {
                return Err(invalid(format!("pair ({s}, {r}) outside {k} industries")));
            }
            counts.increment(s, r);
        }
        Ok(counts)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, s: usize, r: usize) -> u64 {
        self.counts[s * self.k + r]
    }

    pub fn increment(&mut self, s: usize, r: usize) {
        self.counts[s * self.k + r] += 1;
        self.total += 1;
    }

    /// Removes one link from pair `(s, r)`; the pair must be nonempty.
    pub fn decrement(&mut self, s: usize, r: usize) {
        let c = &mut self.counts[s * self.k + r];
        assert!(*c > 0, "decrement of empty pair ({s}, {r})");
        *c -= 1;
        self.total -= 1;
    }

    /// Copy with one more (empty) industry appended.
    pub fn grown(&self) -> Self {
        let k = self.k + 1;
        let mut out = Self::zeros(k);
        for s in 0..self.k {
            for r in 0..self.k {
                out.counts[s * k + r] = self.get(s, r);
            }
        }
        out.total = self.total;
        out
    }

    /// Applies `perm` (old label → new label) to both slots.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.k);
        let mut out = Self::zeros(self.k);
        for s in 0..self.k {
            for r in 0..self.k {
                out.counts[perm[s] * self.k + perm[r]] = self.get(s, r);
            }
        }
        out.total = self.total;
        out
    }

    /// Every industry takes part in at least one counted pair.
    pub fn is_dense(&self) -> bool {
        (0..self.k).all(|i| (0..self.k).any(|j| self.get(i, j) > 0 || self.get(j, i) > 0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Pair, u64)> + '_ {
        (0..self.k * self.k).map(move |z| ((z / self.k, z % self.k), self.counts[z]))
    }
}

/// Draws one trace of `n_links` links.
pub fn simulate<R: Rng + ?Sized>(n_links: usize, params: &Crp2dParams, rng: &mut R) -> Result<Crp2dTrace> {
    if n_links == 0 {
        return Err(invalid("n_links must be at least 1"));
    }
    let mut pairs = Vec::with_capacity(n_links);
    let mut events = Vec::with_capacity(n_links);
    pairs.push((0, 0));
    events.push(CreationEvent::NewIndustry);
    let mut counts = PairCounts::zeros(1);
    counts.increment(0, 0);
    let mut weights = Vec::new();
    for step in 1..n_links {
        let n = step as f64;
        let k = counts.k();
        if rng.random::<f64>() * (n + params.eta) < params.eta {
            let u = rng.random_range(0..2 * k + 1);
            let pair = if u <= k { (k, u) } else { (u - k - 1, k) };
            counts = counts.grown();
            counts.increment(pair.0, pair.1);
            pairs.push(pair);
            events.push(CreationEvent::NewIndustry);
        } else {
            weights.clear();
            weights.extend(counts.counts.iter().map(|&c| c as f64 + params.alpha));
            let z = sample_index(&weights, rng);
            let pair = (z / k, z % k);
            events.push(if counts.counts[z] == 0 {
                CreationEvent::NewPair
            } else {
                CreationEvent::Existing
            });
            counts.increment(pair.0, pair.1);
            pairs.push(pair);
        }
    }
    Ok(Crp2dTrace { pairs, events })
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Exact log probability of a trace under the sequential process.
pub fn sequential_log_prob(trace: &Crp2dTrace, params: &Crp2dParams) -> Result<f64> {
    // re-derive events so a hand-built trace cannot lie about them
    let checked = Crp2dTrace::from_pairs(trace.pairs.clone())?;
    if checked.events != trace.events {
        return Err(Error::InvalidTrace("events disagree with the pair sequence".into()));
    }
    let (alpha, eta) = (params.alpha, params.eta);
    let mut counts = PairCounts::zeros(1);
    counts.increment(0, 0);
    let mut lp = 0.0;
    for (step, (&(s, r), event)) in trace.pairs.iter().zip(&trace.events).enumerate().skip(1) {
        let n = step as f64;
        let k = counts.k();
        if *event == CreationEvent::NewIndustry {
            lp += eta.ln() - (n + eta).ln() - ((2 * k + 1) as f64).ln();
            counts = counts.grown();
        } else {
            let kk = (k * k) as f64;
            lp += n.ln() - (n + eta).ln() + (counts.get(s, r) as f64 + alpha).ln()
                - (kk * alpha + n).ln();
        }
        counts.increment(s, r);
    }
    Ok(lp)
}

/// Log of the exchangeable approximation to the joint over pair counts,
/// without its normalizing constant:
///
/// `Γ(η)·Π_z Γ(n_z+α) / (Γ(N+η)·Γ(α)^{K²}) · (η/α)^K · Π_{k=1..K} 1/(2k−1)`
///
/// The product over `z` runs over all `K²` pairs.
pub fn approx_joint_log_prob(counts: &PairCounts, params: &Crp2dParams) -> f64 {
    let (alpha, eta) = (params.alpha, params.eta);
    let k = counts.k();
    let lga = ln_gamma(alpha);
    let pair_term: f64 = counts
        .counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { ln_gamma(c as f64 + alpha) - lga })
        .sum();
    let industry_term: f64 = (1..=k).map(|j| -((2 * j - 1) as f64).ln()).sum();
    ln_gamma(eta) - ln_gamma(counts.total() as f64 + eta)
        + pair_term
        + k as f64 * (eta.ln() - alpha.ln())
        + industry_term
}

/// Unnormalized prior weights for where the next link goes.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorWeights {
    pub k: usize,
    /// `n_z+α` for each of the `K²` existing-industry pairs, row-major.
    /// Unused pairs carry weight `α`.
    pub existing: Vec<f64>,
    /// Weight of each of the `2K+1` pairs that open industry `K`.
    pub new_industry_each: f64,
}

impl PriorWeights {
    pub fn new_industry_pairs(&self) -> impl Iterator<Item = Pair> + '_ {
        let k = self.k;
        (0..=k).map(move |r| (k, r)).chain((0..k).map(move |s| (s, k)))
    }

    /// Every outcome with its weight; pairs touching industry `K` open it.
    pub fn outcomes(&self) -> Vec<(Pair, f64)> {
        let k = self.k;
        let mut out: Vec<(Pair, f64)> = self
            .existing
            .iter()
            .enumerate()
            .map(|(z, &w)| ((z / k, z % k), w))
            .collect();
        out.extend(self.new_industry_pairs().map(|p| (p, self.new_industry_each)));
        out
    }

    pub fn total(&self) -> f64 {
        self.existing.iter().sum::<f64>() + self.new_industry_each * (2 * self.k + 1) as f64
    }
}

/// Prior conditional for one more link given `counts` (which may be a state
/// with one link removed, so some industries can be unused).
pub fn prior_conditional_weights(counts: &PairCounts, params: &Crp2dParams) -> PriorWeights {
    let k = counts.k();
    PriorWeights {
        k,
        existing: counts.counts.iter().map(|&c| c as f64 + params.alpha).collect(),
        new_industry_each: params.eta / (2 * k + 1) as f64,
    }
}

/// Monte Carlo histogram of simulated traces, split into fixed chunks that
/// each own a random stream so the result does not depend on `exec`.
pub fn simulate_histogram(
    n_links: usize,
    params: &Crp2dParams,
    draws: usize,
    seed: u64,
    exec: Execution,
) -> Result<HashMap<Vec<Pair>, u64>> {
    if n_links == 0 {
        return Err(invalid("n_links must be at least 1"));
    }
    const CHUNK: usize = 50_000;
    let chunks = draws.div_ceil(CHUNK);
    let partials = par::map_range(exec, chunks, |c| {
        let mut rng = stream_rng(seed, Stream::Simulation(c as u64));
        let mut hist: HashMap<Vec<Pair>, u64> = HashMap::new();
        let len = CHUNK.min(draws - c * CHUNK);
        for _ in 0..len {
            let trace = simulate(n_links, params, &mut rng).expect("n_links checked");
            *hist.entry(trace.pairs).or_default() += 1;
        }
        hist
    });
    let mut hist = HashMap::new();
    for part in partials {
        for (k, v) in part {
            *hist.entry(k).or_default() += v;
        }
    }
    Ok(hist)
}

/// All valid traces of exactly `n_links` links.
pub fn enumerate_traces(n_links: usize) -> Vec<Crp2dTrace> {
    fn extend(prefix: &mut Vec<Pair>, k: usize, remaining: usize, out: &mut Vec<Crp2dTrace>) {
        if remaining == 0 {
            out.push(Crp2dTrace::from_pairs(prefix.clone()).expect("valid by construction"));
            return;
        }
        for s in 0..=k {
            for r in 0..=k {
                let next_k = if s.max(r) == k { k + 1 } else { k };
                prefix.push((s, r));
                extend(prefix, next_k, remaining - 1, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    if n_links == 0 {
        return out;
    }
    let mut prefix = vec![(0, 0)];
    extend(&mut prefix, 1, n_links - 1, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn params(a: f64, e: f64) -> Crp2dParams {
        Crp2dParams::new(a, e).unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(Crp2dParams::new(0.0, 1.0).is_err());
        assert!(Crp2dParams::new(1.0, -1.0).is_err());
        assert!(Crp2dParams::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn single_link_is_forced() {
        let p = params(0.3, 0.7);
        let mut rng = stream_rng(1, Stream::Init);
        let t = simulate(1, &p, &mut rng).unwrap();
        assert_eq!(t.pairs(), &[(0, 0)]);
        assert_eq!(t.events(), &[CreationEvent::NewIndustry]);
        assert_eq!(sequential_log_prob(&t, &p).unwrap(), 0.0);
        assert!(simulate(0, &p, &mut rng).is_err());
    }

    #[test]
    fn trace_invariants_hold_for_simulations() {
        let p = params(0.5, 1.5);
        let mut rng = stream_rng(2, Stream::Init);
        for _ in 0..200 {
            let t = simulate(12, &p, &mut rng).unwrap();
            assert_eq!(Crp2dTrace::from_pairs(t.pairs().to_vec()).unwrap(), t);
            let ks = t.industry_counts();
            assert_eq!(ks[0], 1);
            assert!(ks.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1));
        }
    }

    #[test]
    fn rejects_invalid_traces() {
        assert!(Crp2dTrace::from_pairs(vec![]).is_err());
        assert!(Crp2dTrace::from_pairs(vec![(0, 1)]).is_err());
        assert!(Crp2dTrace::from_pairs(vec![(0, 0), (1, 2)]).is_err());
        let bad: std::result::Result<Crp2dTrace, _> = serde_json::from_str(
            r#"{"pairs": [[0,0],[0,0]], "events": ["new_industry","new_pair"]}"#,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn json_shape() {
        let t = Crp2dTrace::from_pairs(vec![(0, 0), (0, 1), (1, 1), (0, 0)]).unwrap();
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(
            v,
            serde_json::json!({
                "pairs": [[0,0],[0,1],[1,1],[0,0]],
                "events": ["new_industry","new_industry","new_pair","existing"]
            })
        );
        let back: Crp2dTrace = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn single_pair_joint_is_zero() {
        let c = PairCounts::from_pairs(1, [(0, 0)]).unwrap();
        for (a, e) in [(0.05, 0.05), (1.0, 2.0), (3.0, 0.1)] {
            assert!(approx_joint_log_prob(&c, &params(a, e)).abs() < 1e-12);
        }
    }

    #[test]
    fn prior_weights_branches() {
        let p = params(0.05, 0.3);
        let c = PairCounts::from_pairs(1, [(0, 0); 3]).unwrap();
        let w = prior_conditional_weights(&c, &p);
        assert_eq!(w.existing, vec![3.05]);
        assert!((w.new_industry_each - 0.1).abs() < 1e-15);
        assert_eq!(w.outcomes().len(), 4);

        let c = PairCounts::from_pairs(2, [(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        let w = prior_conditional_weights(&c, &p);
        let outcomes = w.outcomes();
        assert_eq!(outcomes.len(), 9);
        assert!(w.existing.iter().all(|&x| (x - 1.05).abs() < 1e-15));
        assert_eq!(w.new_industry_pairs().count(), 5);
    }

    #[test]
    fn enumeration_sizes() {
        assert_eq!(enumerate_traces(1).len(), 1);
        assert_eq!(enumerate_traces(2).len(), 4);
        // from (0,0): 1 existing + 3 new; from K=2 states: 4 + 5 each
        assert_eq!(enumerate_traces(3).len(), 4 + 3 * 9);
    }
}
