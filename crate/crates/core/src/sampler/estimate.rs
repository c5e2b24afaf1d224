use serde::{Deserialize, Serialize};

use super::state::GibbsState;
use super::{Model, ModelConfig};
use crate::par::{self, Execution};

/// Smoothed point estimates read off one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEstimate {
    pub k: usize,
    /// Distribution over the `k×k` pairs, row-major (sender, receiver).
    pub theta: Vec<f64>,
    /// `phi[k][i]`: distribution over nodes for industry `k`.
    pub phi: Vec<Vec<f64>>,
    /// `psi[k][w]`: distribution over words for topic `k`.
    pub psi: Vec<Vec<f64>>,
    /// `x[i][k]`: distribution over industries for node `i`.
    pub x: Vec<Vec<f64>>,
}

impl PosteriorEstimate {
    pub fn num_nodes(&self) -> usize {
        self.x.len()
    }

    pub fn theta_at(&self, s: usize, r: usize) -> f64 {
        self.theta[s * self.k + r]
    }

    /// Probability that a generated link is (i, j).
    pub fn link_score(&self, i: usize, j: usize) -> f64 {
        let mut total = 0.0;
        for s in 0..self.k {
            let ps = self.phi[s][i];
            for r in 0..self.k {
                total += self.theta_at(s, r) * ps * self.phi[r][j];
            }
        }
        total
    }

    /// Link scores for all `m×m` ordered pairs, row-major.
    pub fn score_matrix(&self, exec: Execution) -> Vec<f64> {
        let m = self.num_nodes();
        let k = self.k;
        // through[s][j] = Σ_r θ(s, r)·φ_r(j)
        let through: Vec<Vec<f64>> = (0..k)
            .map(|s| {
                (0..m)
                    .map(|j| (0..k).map(|r| self.theta_at(s, r) * self.phi[r][j]).sum())
                    .collect()
            })
            .collect();
        let mut scores = vec![0.0; m * m];
        let rows: Vec<Vec<f64>> = par::map_range(exec, m, |i| {
            (0..m)
                .map(|j| (0..k).map(|s| self.phi[s][i] * through[s][j]).sum())
                .collect()
        });
        for (i, row) in rows.into_iter().enumerate() {
            scores[i * m..(i + 1) * m].copy_from_slice(&row);
        }
        scores
    }

    /// Predictive probability of word `w` at node `i`.
    pub fn word_prob(&self, i: usize, w: usize) -> f64 {
        (0..self.k).map(|k| self.x[i][k] * self.psi[k][w]).sum()
    }

    /// Elementwise mean of estimates with the same shape.
    pub fn average(estimates: &[PosteriorEstimate]) -> Option<PosteriorEstimate> {
        let first = estimates.first()?;
        if estimates.iter().any(|e| e.k != first.k) {
            return None;
        }
        let n = estimates.len() as f64;
        let mut out = first.clone();
        let mean_into = |dst: &mut [f64], get: &dyn Fn(&PosteriorEstimate) -> &[f64]| {
            for (idx, d) in dst.iter_mut().enumerate() {
                *d = estimates.iter().map(|e| get(e)[idx]).sum::<f64>() / n;
            }
        };
        mean_into(&mut out.theta, &|e| &e.theta);
        for k in 0..first.k {
            mean_into(&mut out.phi[k], &|e| &e.phi[k]);
            mean_into(&mut out.psi[k], &|e| &e.psi[k]);
        }
        for i in 0..first.x.len() {
            mean_into(&mut out.x[i], &|e| &e.x[i]);
        }
        Some(out)
    }
}

impl GibbsState {
    pub fn estimate(&self, cfg: &ModelConfig) -> PosteriorEstimate {
        let k = self.k;
        let kf = k as f64;
        let n_links = self.z.len() as f64;
        let theta_den = n_links + (k * k) as f64 * cfg.alpha;
        let theta = self
            .n_pair
            .iter()
            .map(|&n| (n as f64 + cfg.alpha) / theta_den)
            .collect();
        let mb = self.m as f64 * cfg.beta;
        let phi = (0..k)
            .map(|x| {
                let den = self.role_total[x] as f64 + mb;
                self.role[x].iter().map(|&s| (s as f64 + cfg.beta) / den).collect()
            })
            .collect();
        let wg = self.w as f64 * cfg.gamma;
        let psi = (0..k)
            .map(|x| {
                let den = self.c_total[x] as f64 + wg;
                self.c[x].iter().map(|&c| (c as f64 + cfg.gamma) / den).collect()
            })
            .collect();
        let x = (0..self.m)
            .map(|i| match self.model {
                Model::RevSbt | Model::Lda => {
                    let den = self.doc_len(i) as f64 + kf * cfg.gamma;
                    self.doc_topic[i].iter().map(|&c| (c as f64 + cfg.gamma) / den).collect()
                }
                _ => {
                    let den = self.degree[i] as f64 + kf * cfg.beta;
                    (0..k).map(|x| (self.role[x][i] as f64 + cfg.beta) / den).collect()
                }
            })
            .collect();
        PosteriorEstimate { k, theta, phi, psi, x }
    }
}
