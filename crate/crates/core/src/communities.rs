//! Louvain community detection on weighted token graphs and Newman
//! modularity scoring.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::TokenGraph;
use crate::model::TokenId;

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_RESOLUTION: f64 = 1.0;

const GAIN_EPS: f64 = 1e-12;

/// Community label per token, labels dense in `0..count`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommunityAssignment {
    /// Tokens in address order, parallel to `labels`.
    pub tokens: Vec<TokenId>,
    pub labels: Vec<usize>,
    pub count: usize,
    pub modularity: f64,
    pub resolution: f64,
    pub seed: u64,
}

impl CommunityAssignment {
    pub fn label_of(&self, token: &TokenId) -> Option<usize> {
        self.tokens
            .binary_search_by(|t| t.address.cmp(&token.address))
            .ok()
            .map(|i| self.labels[i])
    }

    /// Community sizes indexed by label.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Weighted graph with self-loops, as used between Louvain levels.
struct LevelGraph {
    /// Neighbor lists without self-loops.
    adjacency: Vec<Vec<(usize, f64)>>,
    /// Internal weight folded into each node (each internal edge once).
    self_loops: Vec<f64>,
}

impl LevelGraph {
    fn from_token_graph(g: &TokenGraph) -> Self {
        LevelGraph {
            adjacency: (0..g.node_count())
                .map(|i| g.neighbors(i).iter().map(|&(j, w)| (j, w as f64)).collect())
                .collect(),
            self_loops: vec![0.0; g.node_count()],
        }
    }

    fn len(&self) -> usize {
        self.adjacency.len()
    }

    fn strength(&self, i: usize) -> f64 {
        2.0 * self.self_loops[i] + self.adjacency[i].iter().map(|&(_, w)| w).sum::<f64>()
    }

    /// Moves nodes between communities until a full pass changes nothing.
    /// Returns the community of each node and whether anything moved.
    fn local_moves(&self, resolution: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
        let n = self.len();
        let strength: Vec<f64> = (0..n).map(|i| self.strength(i)).collect();
        let two_w: f64 = strength.iter().sum();
        let mut community: Vec<usize> = (0..n).collect();
        let mut totals = strength.clone();
        if two_w == 0.0 {
            return (community, false);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);

        let mut moved_any = false;
        let mut links: HashMap<usize, f64> = HashMap::new();
        loop {
            let mut moved = false;
            for &i in &order {
                let own = community[i];
                links.clear();
                for &(j, w) in &self.adjacency[i] {
                    *links.entry(community[j]).or_insert(0.0) += w;
                }
                let k_i = strength[i];
                totals[own] -= k_i;
                let gain = |c: usize, w_ic: f64| w_ic - resolution * totals[c] * k_i / two_w;
                let mut best = own;
                let mut best_gain = gain(own, links.get(&own).copied().unwrap_or(0.0));
                // sorted candidates keep the scan independent of hash order
                let mut candidates: Vec<(usize, f64)> = links.iter().map(|(&c, &w)| (c, w)).collect();
                candidates.sort_unstable_by_key(|&(c, _)| c);
                for (c, w_ic) in candidates {
                    let g = gain(c, w_ic);
                    if g > best_gain + GAIN_EPS {
                        best = c;
                        best_gain = g;
                    }
                }
                totals[best] += k_i;
                if best != own {
                    community[i] = best;
                    moved = true;
                    moved_any = true;
                }
            }
            if !moved {
                break;
            }
        }
        (community, moved_any)
    }

    /// Collapses each community into one node.
    fn aggregate(&self, community: &[usize], count: usize) -> LevelGraph {
        let mut self_loops = vec![0.0; count];
        let mut edges: Vec<HashMap<usize, f64>> = vec![HashMap::new(); count];
        for i in 0..self.len() {
            let ci = community[i];
            self_loops[ci] += self.self_loops[i];
            for &(j, w) in &self.adjacency[i] {
                let cj = community[j];
                if ci == cj {
                    // seen from both endpoints
                    self_loops[ci] += w / 2.0;
                } else {
                    *edges[ci].entry(cj).or_insert(0.0) += w;
                }
            }
        }
        let adjacency = edges
            .into_iter()
            .map(|m| {
                let mut v: Vec<(usize, f64)> = m.into_iter().collect();
                v.sort_unstable_by_key(|&(j, _)| j);
                v
            })
            .collect();
        LevelGraph { adjacency, self_loops }
    }
}

/// Relabels to dense labels in order of first appearance.
fn densify(labels: &mut [usize]) -> usize {
    let mut map: HashMap<usize, usize> = HashMap::new();
    for l in labels.iter_mut() {
        let next = map.len();
        *l = *map.entry(*l).or_insert(next);
    }
    map.len()
}

/// Independent Louvain runs per call; the best partition is kept.
pub const DEFAULT_RESTARTS: usize = 10;

/// Two-phase Louvain (local moving, then aggregation) until a level makes no
/// move, best of [`DEFAULT_RESTARTS`] runs.
pub fn louvain(g: &TokenGraph, resolution: f64, seed: u64) -> CommunityAssignment {
    louvain_with_restarts(g, resolution, seed, DEFAULT_RESTARTS)
}

/// Runs Louvain `restarts` times (at least once) with visit orders drawn from
/// one seeded generator and keeps the highest modularity; ties go to the
/// earlier run.
pub fn louvain_with_restarts(g: &TokenGraph, resolution: f64, seed: u64, restarts: usize) -> CommunityAssignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, usize, f64)> = None;
    for _ in 0..restarts.max(1) {
        let (labels, count) = louvain_once(g, resolution, &mut rng);
        let q = modularity_of_labels(g, &labels, resolution);
        if best.as_ref().is_none_or(|b| q > b.2 + GAIN_EPS) {
            best = Some((labels, count, q));
        }
    }
    let (labels, count, modularity) = best.expect("at least one run");
    CommunityAssignment {
        tokens: g.nodes().to_vec(),
        labels,
        count,
        modularity,
        resolution,
        seed,
    }
}

fn louvain_once(g: &TokenGraph, resolution: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, usize) {
    let mut membership: Vec<usize> = (0..g.node_count()).collect();
    let mut level = LevelGraph::from_token_graph(g);
    loop {
        let (mut community, moved) = level.local_moves(resolution, rng);
        if !moved {
            break;
        }
        let count = densify(&mut community);
        for m in membership.iter_mut() {
            *m = community[*m];
        }
        level = level.aggregate(&community, count);
    }
    let count = densify(&mut membership);
    (membership, count)
}

/// `Q = sum_c [ w_in(c) / W - resolution * (w_tot(c) / 2W)^2 ]`, `W` the total
/// edge weight. Zero on graphs without edges.
pub fn modularity(g: &TokenGraph, assignment: &CommunityAssignment, resolution: f64) -> Result<f64> {
    let labels: Vec<usize> = g
        .nodes()
        .iter()
        .map(|t| {
            assignment
                .label_of(t)
                .ok_or_else(|| Error::InvalidAssignment(format!("token {t} has no community label")))
        })
        .collect::<Result<_>>()?;
    Ok(modularity_of_labels(g, &labels, resolution))
}

/// Modularity for labels indexed like the graph's nodes.
pub fn modularity_of_labels(g: &TokenGraph, labels: &[usize], resolution: f64) -> f64 {
    let total = g.total_weight() as f64;
    if total == 0.0 {
        return 0.0;
    }
    let c = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut internal = vec![0.0; c];
    let mut tot = vec![0.0; c];
    for (i, j, w) in g.edges() {
        let w = w as f64;
        if labels[i] == labels[j] {
            internal[labels[i]] += w;
        }
        tot[labels[i]] += w;
        tot[labels[j]] += w;
    }
    internal
        .iter()
        .zip(&tot)
        .map(|(&win, &wt)| win / total - resolution * (wt / (2.0 * total)).powi(2))
        .sum()
}
