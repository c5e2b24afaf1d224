//! Industry-level graph export: one vertex per industry, one arc per used
//! industry pair.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::crp2d::Pair;
use crate::error::{invalid, Error, Result};
use crate::sampler::Snapshot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndustryVertex {
    pub id: usize,
    /// Links with at least one end in this industry.
    pub size: u64,
    pub top_words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndustryArc {
    pub source: usize,
    pub target: usize,
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndustryGraph {
    pub vertices: Vec<IndustryVertex>,
    pub arcs: Vec<IndustryArc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    GraphMl,
    Json,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dot" => Ok(Self::Dot),
            "graphml" => Ok(Self::GraphMl),
            "json" => Ok(Self::Json),
            other => Err(invalid(format!("unknown export format {other:?} (expected dot, graphml or json)"))),
        }
    }
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Dot => "dot",
            Self::GraphMl => "graphml",
            Self::Json => "json",
        }
    }
}

fn top_words(psi: &[f64], vocabulary: &[String], n: usize) -> Vec<String> {
    let mut idx: Vec<usize> = (0..psi.len().min(vocabulary.len())).collect();
    idx.sort_by(|&a, &b| psi[b].total_cmp(&psi[a]).then(a.cmp(&b)));
    idx.into_iter().take(n).map(|w| vocabulary[w].clone()).collect()
}

impl IndustryGraph {
    /// Builds the graph from per-link industry pairs and, when available,
    /// topic-word distributions.
    pub fn new(k: usize, assignments: &[Pair], psi: &[Vec<f64>], vocabulary: &[String], words: usize) -> Result<Self> {
        let mut size = vec![0u64; k];
        let mut counts = vec![0u64; k * k];
        for &(s, r) in assignments {
            if s >= k || r >= k {
                return Err(Error::InvalidState(format!("pair ({s}, {r}) outside {k} industries")));
            }
            counts[s * k + r] += 1;
            size[s] += 1;
            if r != s {
                size[r] += 1;
            }
        }
        let vertices = (0..k)
            .map(|id| IndustryVertex {
                id,
                size: size[id],
                top_words: psi.get(id).map_or_else(Vec::new, |p| top_words(p, vocabulary, words)),
            })
            .collect();
        let arcs = counts
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0)
            .map(|(idx, &weight)| IndustryArc { source: idx / k, target: idx % k, weight })
            .collect();
        Ok(Self { vertices, arcs })
    }

    pub fn from_snapshot(snapshot: &Snapshot, words: usize) -> Result<Self> {
        let psi = if snapshot.config.model.uses_words() { &snapshot.estimate.psi[..] } else { &[] };
        Self::new(snapshot.k, &snapshot.edge_assignments, psi, &snapshot.vocabulary, words)
    }

    fn label(v: &IndustryVertex) -> String {
        if v.top_words.is_empty() {
            format!("industry {}", v.id)
        } else {
            format!("{}: {}", v.id, v.top_words.join(" "))
        }
    }

    pub fn to_dot(&self) -> String {
        let esc = |s: &str| s.replace('\\', "\\\\").replace('"', "\\\"");
        let mut out = String::from("digraph industries {\n");
        for v in &self.vertices {
            let _ = writeln!(out, "  i{} [label=\"{}\", size={}];", v.id, esc(&Self::label(v)), v.size);
        }
        for a in &self.arcs {
            let _ = writeln!(out, "  i{} -> i{} [weight={}];", a.source, a.target, a.weight);
        }
        out.push_str("}\n");
        out
    }

    pub fn to_graphml(&self) -> String {
        let esc = |s: &str| {
            s.replace('&', "&amp;")
                .replace('<', "&lt;")
                .replace('>', "&gt;")
                .replace('"', "&quot;")
                .replace('\'', "&apos;")
        };
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        out.push_str(
            "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" \
             xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" \
             xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns \
             http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n",
        );
        out.push_str("  <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n");
        out.push_str("  <key id=\"size\" for=\"node\" attr.name=\"size\" attr.type=\"long\"/>\n");
        out.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"long\"/>\n");
        out.push_str("  <graph id=\"industries\" edgedefault=\"directed\">\n");
        for v in &self.vertices {
            let _ = writeln!(out, "    <node id=\"i{}\">", v.id);
            let _ = writeln!(out, "      <data key=\"label\">{}</data>", esc(&Self::label(v)));
            let _ = writeln!(out, "      <data key=\"size\">{}</data>", v.size);
            out.push_str("    </node>\n");
        }
        for (n, a) in self.arcs.iter().enumerate() {
            let _ = writeln!(out, "    <edge id=\"e{n}\" source=\"i{}\" target=\"i{}\">", a.source, a.target);
            let _ = writeln!(out, "      <data key=\"weight\">{}</data>", a.weight);
            out.push_str("    </edge>\n");
        }
        out.push_str("  </graph>\n</graphml>\n");
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn render(&self, format: ExportFormat) -> Result<String> {
        Ok(match format {
            ExportFormat::Dot => self.to_dot(),
            ExportFormat::GraphMl => self.to_graphml(),
            ExportFormat::Json => self.to_json()?,
        })
    }
}
