use statrs::function::gamma::ln_gamma;

use super::state::GibbsState;
use super::{Model, ModelConfig, TextCoupling};
use crate::crp2d::{approx_joint_log_prob, Crp2dParams};

/// Σ_x lnΓ(n_x+a) − len·lnΓ(a) + lnΓ(len·a) − lnΓ(Σn + len·a)
fn dirichlet_multinomial<I: IntoIterator<Item = u32>>(counts: I, a: f64) -> f64 {
    let lga = ln_gamma(a);
    let mut len = 0usize;
    let mut total = 0u64;
    let mut acc = 0.0;
    for n in counts {
        len += 1;
        total += n as u64;
        if n > 0 {
            acc += ln_gamma(n as f64 + a) - lga;
        }
    }
    let la = len as f64 * a;
    acc + ln_gamma(la) - ln_gamma(total as f64 + la)
}

impl GibbsState {
    /// Collapsed log joint of the current assignments, up to a constant
    /// that depends only on the data and hyperparameters.
    pub fn log_joint(&self, cfg: &ModelConfig) -> f64 {
        let k = self.k;
        let mut lp = 0.0;
        if self.model.uses_edges() {
            lp += if self.model.is_infinite() {
                let params = Crp2dParams {
                    alpha: cfg.alpha,
                    eta: cfg.eta,
                };
                approx_joint_log_prob(&self.pair_counts(), &params)
            } else {
                dirichlet_multinomial(self.n_pair.iter().copied(), cfg.alpha)
            };
        }
        match self.model {
            Model::Sb | Model::Sbt | Model::InfSbt => {
                for row in &self.role {
                    lp += dirichlet_multinomial(row.iter().copied(), cfg.beta);
                }
            }
            Model::RevSbt => {
                // endpoints drawn from the smoothed word-count share of each industry
                let mb = self.m as f64 * cfg.beta;
                for x in 0..k {
                    let den = (self.c_total[x] as f64 + mb).ln();
                    for i in 0..self.m {
                        let s = self.role[x][i];
                        if s > 0 {
                            lp += s as f64 * ((self.doc_topic[i][x] as f64 + cfg.beta).ln() - den);
                        }
                    }
                }
            }
            Model::Lda => {}
        }
        if self.model.uses_words() {
            for row in &self.c {
                lp += dirichlet_multinomial(row.iter().copied(), cfg.gamma);
            }
        }
        match self.model {
            Model::Sbt | Model::InfSbt => {
                let kb = k as f64 * cfg.beta;
                for i in 0..self.m {
                    let t_i = self.docs[i].len();
                    if t_i == 0 {
                        continue;
                    }
                    for x in 0..k {
                        let m_ik = self.doc_topic[i][x];
                        if m_ik > 0 {
                            lp += m_ik as f64 * (self.role[x][i] as f64 + cfg.beta).ln();
                        }
                    }
                    if cfg.coupling == TextCoupling::Corrected {
                        lp -= t_i as f64 * (self.degree[i] as f64 + kb).ln();
                    }
                }
            }
            Model::RevSbt | Model::Lda => {
                for row in &self.doc_topic {
                    lp += dirichlet_multinomial(row.iter().copied(), cfg.gamma);
                }
            }
            Model::Sb => {}
        }
        lp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EdgeList, NodeCorpus};
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn dirichlet_multinomial_small_case() {
        // two categories, counts (1, 0), a = 1: p = 1/2
        assert!((dirichlet_multinomial([1, 0], 1.0) - 0.5f64.ln()).abs() < 1e-12);
        // counts (1, 1): 1/2 * 1/3
        assert!((dirichlet_multinomial([1, 1], 1.0) - (1.0f64 / 6.0).ln()).abs() < 1e-12);
        assert_eq!(dirichlet_multinomial([0, 0, 0], 0.3), 0.0);
    }

    #[test]
    fn label_permutation_invariance() {
        let edges = EdgeList::new(vec![(0, 1), (1, 2), (2, 0), (1, 1), (0, 2)], 3).unwrap();
        let corpus = NodeCorpus::new(vec![vec![0, 1], vec![1], vec![0, 0, 1]], vec!["a".into(), "b".into()]).unwrap();
        for model in Model::ALL {
            let cfg = ModelConfig::new(model).with_k(3).with_seed(1);
            let mut s = GibbsState::init(&cfg, &edges, &corpus).unwrap();
            for sweep in 0..5 {
                s.sweep(&cfg, &mut stream_rng(2, Stream::Sweep(sweep)));
            }
            let k = s.k();
            let perm: Vec<usize> = (0..k).map(|x| (x + 1) % k).collect();
            let z: Vec<_> = s.edge_assignments().iter().map(|&(a, b)| (perm[a], perm[b])).collect();
            let r: Vec<Vec<usize>> = s.word_topics().iter().map(|t| t.iter().map(|&x| perm[x]).collect()).collect();
            let p = GibbsState::from_assignments(&cfg, &edges, &corpus, k, &z, &r).unwrap();
            assert!((s.log_joint(&cfg) - p.log_joint(&cfg)).abs() < 1e-9, "{model}");
        }
    }
}
