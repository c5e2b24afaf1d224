//! Full conditionals for one edge or one word position, and the sweep.
//!
//! Every conditional is the exact ratio of `log_joint` between the
//! candidate states (for `InfSbt`, of the joint with the exchangeable 2D-CRP
//! prior). When both endpoints of an edge land in the same industry the
//! receiver factor is evaluated after the sender's increment, which keeps
//! the ratio exact for self-pairs and self-loops.

use rand::Rng;

use super::state::GibbsState;
use super::{Model, ModelConfig};
use crate::crp2d::Pair;
use crate::error::{invalid, Result};

#[derive(Debug, Default, Clone)]
pub(super) struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
    b_diag: Vec<f64>,
    weights: Vec<f64>,
    /// Per-bucket buffers for the sparse edge sampler.
    diag: Vec<f64>,
    rows: Vec<f64>,
    cells: Vec<(u32, f64)>,
}

/// Normalized distribution over pairs for one edge. For `InfSbt` the table
/// has one extra row and column; pairs touching index `k` open a new
/// industry.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeConditional {
    k: usize,
    width: usize,
    probs: Vec<f64>,
}

impl EdgeConditional {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn prob(&self, s: usize, r: usize) -> f64 {
        self.probs[s * self.width + r]
    }

    pub fn opens_industry(&self, (s, r): Pair) -> bool {
        s.max(r) == self.k
    }

    pub fn iter(&self) -> impl Iterator<Item = (Pair, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(z, &p)| ((z / self.width, z % self.width), p))
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Normalized distribution over topics for one word position.
#[derive(Debug, Clone, PartialEq)]
pub struct WordConditional {
    pub probs: Vec<f64>,
}

// Factors are multiplied three at a time, so keep each well inside range.
fn all_usable(v: &[f64]) -> bool {
    v.iter().all(|&x| x > 1e-90 && x < 1e90)
}

fn exp_shifted(values: &mut [f64], shift: f64) {
    for v in values {
        *v = (*v - shift).exp();
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
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

/// Index whose cumulative weight interval contains `u`, if any.
fn walk(weights: &[f64], mut u: f64) -> Option<usize> {
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return Some(i);
        }
        u -= w;
    }
    None
}

fn last_positive(weights: &[f64]) -> usize {
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

impl GibbsState {
    /// Role count of node `i` in industry `x`; zero for the not-yet-open
    /// industry `x == k`.
    #[inline]
    fn role_at(&self, x: usize, i: usize) -> f64 {
        if x < self.k {
            self.role[x][i] as f64
        } else {
            0.0
        }
    }

    #[inline]
    fn role_total_at(&self, x: usize) -> f64 {
        if x < self.k {
            self.role_total[x] as f64
        } else {
            0.0
        }
    }

    #[inline]
    fn doc_topic_at(&self, i: usize, x: usize) -> u32 {
        if x < self.k {
            self.doc_topic[i][x]
        } else {
            0
        }
    }

    /// Factor by which node `i`'s word-topic likelihood changes when its
    /// role count in `x` goes from `role` to `role+1`. The degree term of
    /// the corrected coupling, ((Kβ+Q_i)/(Kβ+Q_i+1))^T_i, is the same for
    /// every candidate industry and cancels on normalization, so it is left
    /// out here and kept only in `log_joint`.
    #[inline]
    fn text_factor(&self, cfg: &ModelConfig, i: usize, x: usize, role: f64) -> f64 {
        match self.doc_topic_at(i, x) {
            0 => 1.0,
            m_ik => ((role + 1.0 + cfg.beta) / (role + cfg.beta)).powi(m_ik as i32),
        }
    }

    #[inline]
    fn ln_text_factor(&self, cfg: &ModelConfig, i: usize, x: usize, role: f64) -> f64 {
        match self.doc_topic_at(i, x) {
            0 => 0.0,
            m_ik => m_ik as f64 * ((role + 1.0 + cfg.beta).ln() - (role + cfg.beta).ln()),
        }
    }

    /// Per-industry endpoint factors for sender `i`, receiver `j`
    /// (`b`), and receiver when it shares the sender's industry (`b_diag`).
    /// With `log` set the factors are log values. Otherwise returns false
    /// when a linear-space value under- or overflowed.
    fn endpoint_factors(&self, i: usize, j: usize, cfg: &ModelConfig, s: &mut Scratch, log: bool) -> bool {
        let width = s.a.len();
        let mb = self.m as f64 * cfg.beta;
        let beta = cfg.beta;
        let same = f64::from(u8::from(i == j));
        for x in 0..width {
            let (a, b, bd) = match self.model {
                Model::RevSbt => {
                    let ct = if x < self.k { self.c_total[x] as f64 } else { 0.0 };
                    let den = ct + mb;
                    let a = self.doc_topic_at(i, x) as f64 + beta;
                    let b = self.doc_topic_at(j, x) as f64 + beta;
                    if log {
                        let (a, b) = (a.ln() - den.ln(), b.ln() - den.ln());
                        (a, b, b)
                    } else {
                        (a / den, b / den, b / den)
                    }
                }
                _ => {
                    let ri = self.role_at(x, i);
                    let rj = self.role_at(x, j);
                    let rt = self.role_total_at(x);
                    let coupled = self.model.words_follow_edges();
                    if log {
                        let mut a = (ri + beta).ln() - (rt + mb).ln();
                        let mut b = (rj + beta).ln() - (rt + mb).ln();
                        let mut bd = (rj + same + beta).ln() - (rt + 1.0 + mb).ln();
                        if coupled {
                            a += self.ln_text_factor(cfg, i, x, ri);
                            b += self.ln_text_factor(cfg, j, x, rj);
                            bd += self.ln_text_factor(cfg, j, x, rj + same);
                        }
                        (a, b, bd)
                    } else {
                        let inv = 1.0 / (rt + mb);
                        let mut a = (ri + beta) * inv;
                        let mut b = (rj + beta) * inv;
                        let mut bd = (rj + same + beta) / (rt + 1.0 + mb);
                        if coupled {
                            a *= self.text_factor(cfg, i, x, ri);
                            b *= self.text_factor(cfg, j, x, rj);
                            bd *= self.text_factor(cfg, j, x, rj + same);
                        }
                        (a, b, bd)
                    }
                }
            };
            s.a[x] = a;
            s.b[x] = b;
            s.b_diag[x] = bd;
        }
        log || (all_usable(&s.a) && all_usable(&s.b) && all_usable(&s.b_diag))
    }

    /// Unnormalized weights for a detached edge, written to `s.weights`.
    /// Returns (table width, total weight).
    pub(super) fn edge_weights(&self, e: usize, cfg: &ModelConfig, s: &mut Scratch) -> (usize, f64) {
        let (i, j) = self.edges[e];
        let k = self.k;
        let infinite = self.model.is_infinite();
        let width = k + usize::from(infinite);
        s.a.resize(width, 0.0);
        s.b.resize(width, 0.0);
        s.b_diag.resize(width, 0.0);
        s.weights.resize(width * width, 0.0);
        let log = !self.endpoint_factors(i, j, cfg, s, false);
        if log {
            self.endpoint_factors(i, j, cfg, s, true);
        }
        let alpha = cfg.alpha;
        let new_each = cfg.eta / (2 * k + 1) as f64;
        let (a, b, bd, w) = (&s.a, &s.b, &s.b_diag, &mut s.weights);
        // same industry on both ends: the receiver sees the sender's
        // increment, hence b_diag on the diagonal
        if log {
            let ln_alpha_new = new_each.ln();
            for k1 in 0..width {
                for k2 in 0..width {
                    let prior = if k1 < k && k2 < k {
                        (self.n_pair[k1 * k + k2] as f64 + alpha).ln()
                    } else {
                        ln_alpha_new
                    };
                    let bk = if k1 == k2 { bd[k2] } else { b[k2] };
                    w[k1 * width + k2] = prior + a[k1] + bk;
                }
            }
            let shift = max_of(w);
            exp_shifted(w, shift);
        } else {
            for k1 in 0..k {
                let ak = a[k1];
                let counts = &self.n_pair[k1 * k..(k1 + 1) * k];
                let row = &mut w[k1 * width..k1 * width + k];
                for ((out, &n), &bk) in row.iter_mut().zip(counts).zip(&b[..k]) {
                    *out = (n as f64 + alpha) * bk * ak;
                }
                row[k1] = (counts[k1] as f64 + alpha) * bd[k1] * ak;
            }
            if infinite {
                for k1 in 0..k {
                    w[k1 * width + k] = new_each * a[k1] * b[k];
                }
                let ak = a[k];
                for k2 in 0..k {
                    w[k * width + k2] = new_each * ak * b[k2];
                }
                w[k * width + k] = new_each * ak * bd[k];
            }
        }
        let total = w.iter().sum();
        (width, total)
    }

    /// Unnormalized topic weights for a detached word, written to `out`.
    pub(super) fn word_weights(&self, i: usize, t: usize, cfg: &ModelConfig, out: &mut Vec<f64>) -> f64 {
        let k = self.k;
        out.resize(k, 0.0);
        let w = self.docs[i][t];
        let wg = self.w as f64 * cfg.gamma;
        let gamma = cfg.gamma;
        let beta = cfg.beta;
        let kf = k as f64;
        let doc_den = self.docs[i].len() as f64 - 1.0 + kf * gamma;
        let q = self.degree[i] as f64;
        let mb = self.m as f64 * beta;
        let active = |x: usize| !self.model.is_infinite() || self.role_total[x] > 0;

        let linear = |x: usize| -> f64 {
            let topic_word = (self.c[x][w] as f64 + gamma) / (self.c_total[x] as f64 + wg);
            match self.model {
                Model::Sbt | Model::InfSbt => {
                    let x_ik = (self.role[x][i] as f64 + beta) / (q + kf * beta);
                    x_ik * topic_word
                }
                Model::Lda => (self.doc_topic[i][x] as f64 + gamma) / doc_den * topic_word,
                Model::RevSbt => {
                    let m_ik = self.doc_topic[i][x] as f64;
                    let ct = self.c_total[x] as f64;
                    (m_ik + gamma) / doc_den
                        * topic_word
                        * ((m_ik + 1.0 + beta) / (m_ik + beta)).powi(self.role[x][i] as i32)
                        * ((ct + mb) / (ct + 1.0 + mb)).powi(self.role_total[x] as i32)
                }
                Model::Sb => unreachable!("SB does not sample words"),
            }
        };
        let mut ok = true;
        for x in 0..k {
            out[x] = if active(x) { linear(x) } else { 0.0 };
            if active(x) && !(out[x] > 1e-250 && out[x] < 1e250) {
                ok = false;
            }
        }
        if !ok {
            for x in 0..k {
                if !active(x) {
                    out[x] = f64::NEG_INFINITY;
                    continue;
                }
                let topic_word = (self.c[x][w] as f64 + gamma).ln() - (self.c_total[x] as f64 + wg).ln();
                out[x] = topic_word
                    + match self.model {
                        Model::Sbt | Model::InfSbt => {
                            (self.role[x][i] as f64 + beta).ln() - (q + kf * beta).ln()
                        }
                        Model::Lda => (self.doc_topic[i][x] as f64 + gamma).ln() - doc_den.ln(),
                        Model::RevSbt => {
                            let m_ik = self.doc_topic[i][x] as f64;
                            let ct = self.c_total[x] as f64;
                            (m_ik + gamma).ln() - doc_den.ln()
                                + self.role[x][i] as f64 * ((m_ik + 1.0 + beta).ln() - (m_ik + beta).ln())
                                + self.role_total[x] as f64 * ((ct + mb).ln() - (ct + 1.0 + mb).ln())
                        }
                        Model::Sb => unreachable!(),
                    };
            }
            let shift = max_of(out);
            exp_shifted(out, shift);
        }
        out.iter().sum()
    }

    /// Draws a pair for a detached edge without filling the full table:
    /// diagonal cells, nonzero off-diagonal counts, the α smoothing mass and
    /// the new-industry cells are separate buckets. Same distribution as
    /// `edge_weights`. Returns `None` when linear-space factors are unusable.
    fn sample_edge_sparse<R: Rng + ?Sized>(&self, e: usize, cfg: &ModelConfig, s: &mut Scratch, rng: &mut R) -> Option<Pair> {
        let (i, j) = self.edges[e];
        let k = self.k;
        let width = k + usize::from(self.model.is_infinite());
        s.a.resize(width, 0.0);
        s.b.resize(width, 0.0);
        s.b_diag.resize(width, 0.0);
        if !self.endpoint_factors(i, j, cfg, s, false) {
            return None;
        }
        let alpha = cfg.alpha;
        let (a, b, bd) = (&s.a, &s.b, &s.b_diag);

        s.diag.clear();
        let mut diag_total = 0.0;
        for x in 0..k {
            let w = (self.n_pair[x * k + x] as f64 + alpha) * a[x] * bd[x];
            s.diag.push(w);
            diag_total += w;
        }

        s.cells.clear();
        let mut sparse_total = 0.0;
        let words = self.nz_words;
        for k1 in 0..k {
            let ak = a[k1];
            for (wi, &bits) in self.nz_bits[k1 * words..(k1 + 1) * words].iter().enumerate() {
                let mut bits = bits;
                while bits != 0 {
                    let k2 = wi * 64 + bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    if k2 == k1 {
                        continue;
                    }
                    let cell = k1 * k + k2;
                    let w = self.n_pair[cell] as f64 * ak * b[k2];
                    s.cells.push((cell as u32, w));
                    sparse_total += w;
                }
            }
        }

        let a_sum: f64 = a[..k].iter().sum();
        let b_sum: f64 = b[..k].iter().sum();
        s.rows.clear();
        let mut dense_total = 0.0;
        for x in 0..k {
            let w = alpha * a[x] * (b_sum - b[x]).max(0.0);
            s.rows.push(w);
            dense_total += w;
        }

        let (new_row, new_col, new_corner) = if width > k {
            let each = cfg.eta / (2 * k + 1) as f64;
            (each * a[k] * b_sum, each * a_sum * b[k], each * a[k] * bd[k])
        } else {
            (0.0, 0.0, 0.0)
        };

        let total = diag_total + sparse_total + dense_total + new_row + new_col + new_corner;
        if !(total > 0.0 && total.is_finite()) {
            return None;
        }
        let mut u = rng.random::<f64>() * total;

        if u < diag_total {
            return Some(walk(&s.diag, u).map_or((k - 1, k - 1), |x| (x, x)));
        }
        u -= diag_total;
        if u < sparse_total {
            let mut last = None;
            for &(cell, w) in &s.cells {
                last = Some(cell);
                if u < w {
                    break;
                }
                u -= w;
            }
            let cell = last.expect("nonempty bucket") as usize;
            return Some((cell / k, cell % k));
        }
        u -= sparse_total;
        if u < dense_total {
            let k1 = walk(&s.rows, u).unwrap_or_else(|| last_positive(&s.rows));
            let before: f64 = s.rows[..k1].iter().sum();
            // position inside the row, in units of b
            let mut v = (u - before).max(0.0) / (alpha * a[k1]);
            let mut pick = None;
            for (k2, &bk) in b[..k].iter().enumerate() {
                if k2 == k1 {
                    continue;
                }
                pick = Some(k2);
                if v < bk {
                    break;
                }
                v -= bk;
            }
            return Some((k1, pick.unwrap_or(k1)));
        }
        u -= dense_total;
        if u < new_row {
            let v = u / (new_row / b_sum);
            return Some((k, walk(&b[..k], v).unwrap_or(k - 1)));
        }
        u -= new_row;
        if u < new_col {
            let v = u / (new_col / a_sum);
            return Some((walk(&a[..k], v).unwrap_or(k - 1), k));
        }
        Some((k, k))
    }

    /// Conditional distribution of edge `e`'s pair given everything else.
    /// The state is left unchanged.
    pub fn edge_conditional(&mut self, e: usize, cfg: &ModelConfig) -> Result<EdgeConditional> {
        if !self.model.uses_edges() {
            return Err(invalid("model has no edge assignments"));
        }
        if e >= self.edges.len() {
            return Err(invalid(format!("edge {e} out of range")));
        }
        let pair = self.z[e];
        self.remove_edge(e);
        let mut s = Scratch::default();
        let (width, total) = self.edge_weights(e, cfg, &mut s);
        self.add_edge(e, pair);
        Ok(EdgeConditional {
            k: self.k,
            width,
            probs: s.weights.iter().map(|w| w / total).collect(),
        })
    }

    /// Conditional distribution of the topic at word position `t` of `node`.
    /// The state is left unchanged.
    pub fn word_conditional(&mut self, node: usize, t: usize, cfg: &ModelConfig) -> Result<WordConditional> {
        if !self.model.uses_words() {
            return Err(invalid("model has no word assignments"));
        }
        if node >= self.m || t >= self.docs[node].len() {
            return Err(invalid(format!("word position ({node}, {t}) out of range")));
        }
        let topic = self.r[node][t];
        self.remove_word(node, t);
        let mut out = Vec::new();
        let total = self.word_weights(node, t, cfg, &mut out);
        self.add_word(node, t, topic);
        Ok(WordConditional {
            probs: out.iter().map(|w| w / total).collect(),
        })
    }

    /// One full pass: every edge, then every word position. For `InfSbt`,
    /// industries left without edges are retired at the end.
    pub fn sweep<R: Rng + ?Sized>(&mut self, cfg: &ModelConfig, rng: &mut R) {
        let mut s = Scratch::default();
        if self.model.uses_edges() {
            for e in 0..self.edges.len() {
                self.remove_edge(e);
                let pair = match self.sample_edge_sparse(e, cfg, &mut s, rng) {
                    Some(pair) => pair,
                    None => {
                        let (width, total) = self.edge_weights(e, cfg, &mut s);
                        let idx = sample_index(&s.weights, total, rng);
                        (idx / width, idx % width)
                    }
                };
                if pair.0.max(pair.1) == self.k {
                    self.grow();
                }
                self.z[e] = pair;
                self.add_edge(e, pair);
            }
        }
        if self.model.uses_words() {
            let mut weights = Vec::with_capacity(self.k);
            for i in 0..self.m {
                for t in 0..self.docs[i].len() {
                    self.remove_word(i, t);
                    let total = self.word_weights(i, t, cfg, &mut weights);
                    let topic = sample_index(&weights, total, rng);
                    self.r[i][t] = topic;
                    self.add_word(i, t, topic);
                }
            }
        }
        if self.model.is_infinite() {
            self.compact();
        }
    }
}
