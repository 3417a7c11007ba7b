//! Step-wise comparison systems: TextRank extractive headings and the
//! identify-then-generate / generate-then-aggregate pipeline compositions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::spans_from_labels;

/// TextRank knobs. Window 2 links adjacent tokens; scores come from damped
/// PageRank power iteration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TextRankConfig {
    pub window: usize,
    pub top_k: usize,
    pub damping: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for TextRankConfig {
    fn default() -> Self {
        TextRankConfig {
            window: 2,
            top_k: 2,
            damping: 0.85,
            max_iterations: 100,
            tolerance: 1e-6,
        }
    }
}

/// Undirected co-occurrence graph over unique tokens.
#[derive(Debug, Clone)]
pub struct WordGraph {
    pub tokens: Vec<String>,
    /// adjacency[i] = (neighbour, weight); weights are co-occurrence counts.
    pub adjacency: Vec<Vec<(usize, f64)>>,
}

impl WordGraph {
    pub fn build(tokens: &[String], window: usize) -> Self {
        assert!(window >= 2, "window must span at least two tokens");
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut nodes: Vec<String> = Vec::new();
        for t in tokens {
            if !index.contains_key(t.as_str()) {
                index.insert(t.as_str(), nodes.len());
                nodes.push(t.clone());
            }
        }
        let mut weights: HashMap<(usize, usize), f64> = HashMap::new();
        for (i, a) in tokens.iter().enumerate() {
            for b in tokens.iter().skip(i + 1).take(window - 1) {
                let (ia, ib) = (index[a.as_str()], index[b.as_str()]);
                if ia == ib {
                    continue;
                }
                let key = (ia.min(ib), ia.max(ib));
                *weights.entry(key).or_insert(0.0) += 1.0;
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (&(a, b), &w) in &weights {
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|&(n, _)| n);
        }
        WordGraph {
            tokens: nodes,
            adjacency,
        }
    }

    pub fn node_count(&self) -> usize {
        self.tokens.len()
    }

    /// Damped PageRank: S_i = (1-d) + d * sum_j w_ji / outdeg_j * S_j.
    /// Iterates until the max score delta drops below `tolerance` or the
    /// iteration cap is hit. Returns the scores and the per-iteration deltas.
    pub fn pagerank(&self, damping: f64, max_iterations: usize, tolerance: f64) -> PageRankRun {
        let n = self.node_count();
        let out_weight: Vec<f64> = self
            .adjacency
            .iter()
            .map(|adj| adj.iter().map(|&(_, w)| w).sum())
            .collect();
        let mut scores = vec![1.0; n];
        let mut deltas = Vec::new();
        for _ in 0..max_iterations {
            let mut next = vec![1.0 - damping; n];
            for (j, adj) in self.adjacency.iter().enumerate() {
                if out_weight[j] == 0.0 {
                    continue;
                }
                let share = damping * scores[j] / out_weight[j];
                for &(i, w) in adj {
                    next[i] += share * w;
                }
            }
            let delta = scores
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            scores = next;
            deltas.push(delta);
            if delta < tolerance {
                break;
            }
        }
        PageRankRun { scores, deltas }
    }
}

pub struct PageRankRun {
    pub scores: Vec<f64>,
    pub deltas: Vec<f64>,
}

/// Extractive heading: top-k tokens of the section's word graph by TextRank
/// score, in score order, ties broken lexicographically. Sections too short
/// to form an edge fall back to the most frequent token.
pub fn textrank_heading(section_tokens: &[String], cfg: &TextRankConfig) -> Vec<String> {
    assert!(!section_tokens.is_empty(), "empty section");
    let graph = WordGraph::build(section_tokens, cfg.window);
    if graph.node_count() == 1 || graph.adjacency.iter().all(|a| a.is_empty()) {
        // single node or no co-occurrence edges: most frequent token wins
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in section_tokens {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        return vec![ranked[0].0.to_string()];
    }
    let run = graph.pagerank(cfg.damping, cfg.max_iterations, cfg.tolerance);
    let mut order: Vec<usize> = (0..graph.node_count()).collect();
    order.sort_by(|&a, &b| {
        run.scores[b]
            .partial_cmp(&run.scores[a])
            .unwrap()
            .then_with(|| graph.tokens[a].cmp(&graph.tokens[b]))
    });
    order
        .into_iter()
        .take(cfg.top_k)
        .map(|i| graph.tokens[i].clone())
        .collect()
}

/// A step-wise system's outline.
#[derive(Debug, Clone, PartialEq)]
pub struct StepwiseOutline {
    pub labels: Vec<u8>,
    pub headings: Vec<Vec<String>>,
}

/// Identify-then-generate: take the boundary step's labels as-is and produce
/// one heading per section span.
pub fn ig_pipeline(
    labels: Vec<u8>,
    heading_fn: &mut dyn FnMut(usize, usize) -> Vec<String>,
) -> StepwiseOutline {
    let headings = spans_from_labels(&labels)
        .into_iter()
        .map(|(s, e)| heading_fn(s, e))
        .collect();
    StepwiseOutline { labels, headings }
}

/// Generate-then-aggregate: produce a heading per paragraph, then merge
/// maximal runs of identical headings into sections. Heading equality is
/// exact token-sequence equality.
pub fn ga_pipeline(
    paragraph_count: usize,
    heading_fn: &mut dyn FnMut(usize) -> Vec<String>,
) -> StepwiseOutline {
    assert!(paragraph_count > 0);
    let per_paragraph: Vec<Vec<String>> = (0..paragraph_count).map(|i| heading_fn(i)).collect();
    let mut labels = vec![0u8; paragraph_count];
    let mut headings = Vec::new();
    for i in 0..paragraph_count {
        let run_ends = i + 1 == paragraph_count || per_paragraph[i + 1] != per_paragraph[i];
        if run_ends {
            labels[i] = 1;
            headings.push(per_paragraph[i].clone());
        }
    }
    StepwiseOutline { labels, headings }
}
