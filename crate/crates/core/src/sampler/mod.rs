//! Collapsed Gibbs inference for the sparse block model family.
//!
//! Five models share one state representation:
//!
//! * `Sb`: sparse block model on the edge list alone.
//! * `Sbt`: edges first; each node's word topics are drawn from the smoothed
//!   share of its edge-role counts (`x_ik ∝ q1[k][i]+q2[k][i]+β`).
//! * `RevSbt`: words first (LDA); link endpoints are drawn from the smoothed
//!   share of each industry's word counts.
//! * `InfSbt`: `Sbt` with the two-dimensional CRP prior over pairs and an
//!   unbounded number of industries.
//! * `Lda`: the word side alone.
//!
//! Parameters θ, φ, ψ are integrated out; inference works on count tables.

mod conditional;
mod estimate;
mod likelihood;
mod run;
mod state;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use conditional::{EdgeConditional, WordConditional};
pub use estimate::PosteriorEstimate;
pub use run::{resume, run, run_chains, run_with, Average, Diagnostics, RunOptions, RunOutput, Snapshot, TracePoint, SNAPSHOT_VERSION};
pub use state::GibbsState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Sb,
    Sbt,
    RevSbt,
    InfSbt,
    Lda,
}

impl Model {
    pub const ALL: [Model; 5] = [Model::Sb, Model::Sbt, Model::RevSbt, Model::InfSbt, Model::Lda];

    pub fn uses_edges(self) -> bool {
        self != Model::Lda
    }

    pub fn uses_words(self) -> bool {
        self != Model::Sb
    }

    pub fn is_infinite(self) -> bool {
        self == Model::InfSbt
    }

    /// Word topics follow edge-role counts (as opposed to per-document
    /// topic proportions).
    pub fn words_follow_edges(self) -> bool {
        matches!(self, Model::Sbt | Model::InfSbt)
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Sb => "sb",
            Model::Sbt => "sbt",
            Model::RevSbt => "revsbt",
            Model::InfSbt => "infsbt",
            Model::Lda => "lda",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Model::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown model {s:?}")))
    }
}

/// How the word side sees a node's edge-role counts.
///
/// `Corrected` uses the normalized share `(S_ik+β)/(Q_i+Kβ)`; `Uncorrected`
/// drops the denominator. Within a fixed `K` the two differ by a factor that
/// does not depend on any assignment being resampled, so both produce the
/// same Gibbs chain; they differ in `log_joint` when `K` changes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextCoupling {
    #[default]
    Corrected,
    Uncorrected,
}

fn default_hyper() -> f64 {
    0.05
}

fn default_k() -> usize {
    16
}

fn default_sweeps() -> u64 {
    50_000
}

fn default_trace_every() -> u64 {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: Model,
    /// Industry count for finite models, initial count for `InfSbt`.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_hyper")]
    pub alpha: f64,
    #[serde(default = "default_hyper")]
    pub beta: f64,
    #[serde(default = "default_hyper")]
    pub gamma: f64,
    #[serde(default = "default_hyper")]
    pub eta: f64,
    #[serde(default = "default_sweeps")]
    pub sweeps: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub coupling: TextCoupling,
    /// Record `log_joint` every this many sweeps (0 disables the trace).
    #[serde(default = "default_trace_every")]
    pub trace_every: u64,
}

impl ModelConfig {
    pub fn new(model: Model) -> Self {
        Self {
            model,
            k: default_k(),
            alpha: default_hyper(),
            beta: default_hyper(),
            gamma: default_hyper(),
            eta: default_hyper(),
            sweeps: default_sweeps(),
            seed: 0,
            coupling: TextCoupling::default(),
            trace_every: default_trace_every(),
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_sweeps(mut self, sweeps: u64) -> Self {
        self.sweeps = sweeps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Sets α, β, γ and η to the same value.
    pub fn with_hyper(mut self, value: f64) -> Self {
        self.alpha = value;
        self.beta = value;
        self.gamma = value;
        self.eta = value;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("eta", self.eta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        Ok(())
    }
}
