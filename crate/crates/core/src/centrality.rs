//! Weighted eigenvector centrality, rankings, per-token centrality time
//! series and spike detection over slice series.

use std::cmp::Ordering;

use serde::Serialize;

use crate::analytics::connected_components;
use crate::error::{Error, Result};
use crate::graph::TokenGraph;
use crate::model::{Address, Platform, SliceIndex, TokenId};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralityOptions {
    /// Converged once the largest per-node change drops below this.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Solve each connected component on its own instead of the whole graph.
    /// Component vectors are unit-normalized and then scaled by
    /// `sqrt(|C| / |V|)` so the full vector keeps unit norm.
    pub per_component: bool,
}

impl Default for CentralityOptions {
    fn default() -> Self {
        CentralityOptions {
            tolerance: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
            per_component: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerIteration {
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Dominant eigenvector of a symmetric non-negative weighted adjacency list.
///
/// Iterates `x <- (A + s I) x / |(A + s I) x|` from the uniform vector. The
/// shift leaves eigenvectors unchanged and breaks the `+lambda / -lambda` tie
/// of bipartite graphs (stars, trees) that makes the unshifted iteration
/// oscillate. `s` starts at the mean edge weight and then tracks half the
/// Rayleigh quotient, so the most negative eigenvalue maps to about a third
/// of the dominant one. Both choices scale with the weights, so scaling all
/// weights by `c > 0` runs the same iteration.
pub fn power_iteration(adjacency: &[Vec<(usize, f64)>], tolerance: f64, max_iter: usize) -> PowerIteration {
    let n = adjacency.len();
    if n == 0 {
        return PowerIteration {
            scores: Vec::new(),
            iterations: 0,
            converged: true,
        };
    }
    let (weight_sum, entries) = adjacency
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, c), &(_, w)| (s + w, c + 1));
    let mut shift = if entries == 0 { 1.0 } else { weight_sum / entries as f64 };

    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut next = vec![0.0; n];
    for iter in 1..=max_iter {
        for (v, list) in adjacency.iter().enumerate() {
            let mut acc = shift * x[v];
            for &(u, w) in list {
                acc += w * x[u];
            }
            next[v] = acc;
        }
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rayleigh = x.iter().zip(next.iter()).map(|(a, b)| a * b).sum::<f64>() - shift;
        if norm == 0.0 || !norm.is_finite() {
            return PowerIteration {
                scores: x,
                iterations: iter,
                converged: false,
            };
        }
        let mut delta: f64 = 0.0;
        for (xv, nv) in x.iter_mut().zip(next.iter()) {
            let updated = nv / norm;
            delta = delta.max((updated - *xv).abs());
            *xv = updated;
        }
        if delta < tolerance {
            return PowerIteration {
                scores: x,
                iterations: iter,
                converged: true,
            };
        }
        if rayleigh > 0.0 {
            shift = rayleigh / 2.0;
        }
    }
    PowerIteration {
        scores: x,
        iterations: max_iter,
        converged: false,
    }
}

/// Per-token eigenvector centrality of one graph, unit L2 norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralityVector {
    pub platform: Platform,
    pub slice: SliceIndex,
    /// Tokens in address order, parallel to `scores`.
    pub tokens: Vec<TokenId>,
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl CentralityVector {
    pub fn score(&self, address: &Address) -> Option<f64> {
        self.tokens
            .binary_search_by(|t| t.address.cmp(address))
            .ok()
            .map(|i| self.scores[i])
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TokenId, f64)> {
        self.tokens.iter().zip(self.scores.iter().copied())
    }
}

fn weighted_adjacency(g: &TokenGraph, nodes: &[usize]) -> Vec<Vec<(usize, f64)>> {
    let mut local = vec![usize::MAX; g.node_count()];
    for (k, &v) in nodes.iter().enumerate() {
        local[v] = k;
    }
    nodes
        .iter()
        .map(|&v| {
            g.neighbors(v)
                .iter()
                .filter(|&&(u, _)| local[u] != usize::MAX)
                .map(|&(u, w)| (local[u], w as f64))
                .collect()
        })
        .collect()
}

/// Eigenvector centrality with transfer counts as edge weights (1 on
/// unweighted graphs). Non-convergence is reported through `converged`.
pub fn eigenvector_centrality(g: &TokenGraph, options: &CentralityOptions) -> CentralityVector {
    let n = g.node_count();
    let mut scores = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = true;
    let groups: Vec<Vec<usize>> = if options.per_component {
        connected_components(g).components
    } else {
        vec![(0..n).collect()]
    };
    for members in &groups {
        let adj = weighted_adjacency(g, members);
        let result = power_iteration(&adj, options.tolerance, options.max_iter);
        let scale = if options.per_component {
            (members.len() as f64 / n as f64).sqrt()
        } else {
            1.0
        };
        for (k, &v) in members.iter().enumerate() {
            scores[v] = result.scores[k] * scale;
        }
        iterations = iterations.max(result.iterations);
        converged &= result.converged;
    }
    if !converged {
        log::warn!(
            "eigenvector centrality on {} {} did not converge within {} iterations",
            g.platform(),
            g.slice(),
            options.max_iter
        );
    }
    CentralityVector {
        platform: g.platform().clone(),
        slice: g.slice(),
        tokens: g.nodes().to_vec(),
        scores,
        iterations,
        converged,
    }
}

fn by_score_then_address(a: &(TokenId, f64), b: &(TokenId, f64)) -> Ordering {
    b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0))
}

/// Full ranking: score descending, ties by address ascending.
pub fn ranking(cv: &CentralityVector) -> Vec<(TokenId, f64)> {
    let mut all: Vec<(TokenId, f64)> = cv.iter().map(|(t, s)| (t.clone(), s)).collect();
    all.sort_by(by_score_then_address);
    all
}

/// At most `k` highest-scoring tokens.
pub fn top_k(cv: &CentralityVector, k: usize) -> Vec<(TokenId, f64)> {
    let mut ranked = ranking(cv);
    ranked.truncate(k);
    ranked
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub slice: SliceIndex,
    /// Absent when the token has no activity in the slice.
    pub raw: Option<f64>,
    pub normalized: Option<f64>,
}

/// One token's centrality across slices, normalized by its mean over the
/// slices where it is present.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralityTimeSeries {
    pub token: TokenId,
    pub points: Vec<SeriesPoint>,
    pub mean: f64,
}

impl CentralityTimeSeries {
    pub fn present_slices(&self) -> usize {
        self.points.iter().filter(|p| p.raw.is_some()).count()
    }
}

/// Centrality of every slice graph.
pub fn slice_centralities(series: &[TokenGraph], options: &CentralityOptions) -> Vec<CentralityVector> {
    series.iter().map(|g| eigenvector_centrality(g, options)).collect()
}

pub fn centrality_time_series(series: &[TokenGraph], token: &TokenId) -> Result<CentralityTimeSeries> {
    let vectors = slice_centralities(series, &CentralityOptions::default());
    time_series_from(&vectors, token)
}

/// Builds a token's series from precomputed per-slice vectors.
pub fn time_series_from(vectors: &[CentralityVector], token: &TokenId) -> Result<CentralityTimeSeries> {
    let raws: Vec<(SliceIndex, Option<f64>, Option<&TokenId>)> = vectors
        .iter()
        .map(|cv| {
            let pos = cv.tokens.binary_search_by(|t| t.address.cmp(&token.address)).ok();
            (cv.slice, pos.map(|i| cv.scores[i]), pos.map(|i| &cv.tokens[i]))
        })
        .collect();
    let present: Vec<f64> = raws.iter().filter_map(|(_, r, _)| *r).collect();
    if present.is_empty() {
        return Err(Error::EmptySeries(token.to_string()));
    }
    let mean = present.iter().sum::<f64>() / present.len() as f64;
    let points = raws
        .iter()
        .map(|&(slice, raw, _)| SeriesPoint {
            slice,
            raw,
            // all-zero scores: every slice sits exactly at the mean
            normalized: raw.map(|r| if mean > 0.0 { r / mean } else { 1.0 }),
        })
        .collect();
    let symbol = raws.iter().find_map(|(_, _, t)| t.and_then(|t| t.symbol.clone()));
    Ok(CentralityTimeSeries {
        token: TokenId {
            address: token.address,
            symbol: token.symbol.clone().or(symbol),
        },
        points,
        mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalyParams {
    /// Flag slices whose normalized centrality exceeds this.
    pub threshold: f64,
    /// Ignore tokens present in fewer slices.
    pub min_slices: usize,
    /// Ignore the top tokens of the whole-range ranking.
    pub exclude_global_top: usize,
}

impl Default for AnomalyParams {
    fn default() -> Self {
        AnomalyParams {
            threshold: 5.0,
            min_slices: 5,
            exclude_global_top: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnomalyFlag {
    pub token: TokenId,
    pub slice: SliceIndex,
    pub raw: f64,
    pub normalized: f64,
    pub threshold: f64,
    /// 1-based rank in the whole-range ranking.
    pub global_rank: Option<usize>,
}

/// Flags `(token, slice)` pairs whose centrality spikes relative to the
/// token's own average. The whole-range ranking comes from recombining the
/// series.
pub fn detect_anomalies(series: &[TokenGraph], params: &AnomalyParams) -> Result<Vec<AnomalyFlag>> {
    let options = CentralityOptions::default();
    let whole = crate::graph::recombine(series)?;
    let global = eigenvector_centrality(&whole, &options);
    let vectors = slice_centralities(series, &options);
    detect_anomalies_from(&vectors, &global, params)
}

pub fn detect_anomalies_from(
    vectors: &[CentralityVector],
    global: &CentralityVector,
    params: &AnomalyParams,
) -> Result<Vec<AnomalyFlag>> {
    if params.threshold.is_nan() || params.threshold <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "anomaly threshold must exceed 1, got {}",
            params.threshold
        )));
    }
    let ranked = ranking(global);
    let rank_of = |a: &Address| ranked.iter().position(|(t, _)| &t.address == a).map(|p| p + 1);
    let excluded: Vec<Address> = ranked
        .iter()
        .take(params.exclude_global_top)
        .map(|(t, _)| t.address)
        .collect();

    let mut candidates: Vec<TokenId> = vectors.iter().flat_map(|cv| cv.tokens.iter().cloned()).collect();
    candidates.sort();
    candidates.dedup();

    let mut flags = Vec::new();
    for token in candidates {
        if excluded.contains(&token.address) {
            continue;
        }
        let ts = time_series_from(vectors, &token)?;
        if ts.present_slices() < params.min_slices {
            continue;
        }
        for p in &ts.points {
            if let (Some(raw), Some(norm)) = (p.raw, p.normalized) {
                if norm > params.threshold {
                    flags.push(AnomalyFlag {
                        token: ts.token.clone(),
                        slice: p.slice,
                        raw,
                        normalized: norm,
                        threshold: params.threshold,
                        global_rank: rank_of(&token.address),
                    });
                }
            }
        }
    }
    flags.sort_by(|a, b| {
        b.normalized
            .partial_cmp(&a.normalized)
            .unwrap_or(Ordering::Equal)
            .then(a.slice.cmp(&b.slice))
            .then_with(|| a.token.cmp(&b.token))
    });
    Ok(flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Platform;

    fn tok(i: u64) -> TokenId {
        TokenId::new(Address::from_low_u64(i))
    }

    fn graph(edges: &[(u64, u64, u64)]) -> TokenGraph {
        TokenGraph::from_edges(
            Platform::Uniswap,
            SliceIndex::WHOLE,
            true,
            edges.iter().map(|&(a, b, w)| (tok(a), tok(b), w)),
        )
        .unwrap()
    }

    #[test]
    fn star_analytic() {
        let cv = eigenvector_centrality(&graph(&[(0, 1, 1), (0, 2, 1), (0, 3, 1), (0, 4, 1)]), &CentralityOptions::default());
        assert!(cv.converged);
        assert!((cv.scores[0] - 1.0 / 2f64.sqrt()).abs() < 1e-9);
        for s in &cv.scores[1..] {
            assert!((s - 1.0 / 8f64.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn triangle_symmetric() {
        let cv = eigenvector_centrality(&graph(&[(0, 1, 3), (1, 2, 3), (0, 2, 3)]), &CentralityOptions::default());
        for s in &cv.scores {
            assert!((s - 1.0 / 3f64.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn edgeless_and_empty() {
        let g = TokenGraph::from_parts(Platform::Uniswap, SliceIndex::WHOLE, true, [tok(1), tok(2)], []).unwrap();
        let cv = eigenvector_centrality(&g, &CentralityOptions::default());
        assert!(cv.converged);
        assert!((cv.scores[0] - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        let e = eigenvector_centrality(&TokenGraph::empty(Platform::Uniswap, SliceIndex::WHOLE, true), &CentralityOptions::default());
        assert!(e.is_empty());
    }

    #[test]
    fn non_convergence_is_flagged() {
        let g = graph(&[(0, 1, 1), (1, 2, 5), (2, 3, 1), (3, 0, 2), (0, 2, 1)]);
        let cv = eigenvector_centrality(&g, &CentralityOptions { max_iter: 2, ..Default::default() });
        assert!(!cv.converged);
        assert_eq!(cv.iterations, 2);
    }

    #[test]
    fn per_component_unit_norm() {
        let g = graph(&[(0, 1, 1), (0, 2, 1), (0, 3, 1), (10, 11, 1)]);
        let cv = eigenvector_centrality(&g, &CentralityOptions { per_component: true, ..Default::default() });
        let norm: f64 = cv.scores.iter().map(|s| s * s).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert!(cv.score(&tok(11).address).unwrap() > 0.1);
    }

    #[test]
    fn top_k_rules() {
        let tokens = vec![tok(1), tok(2), tok(3)];
        let cv = CentralityVector {
            platform: Platform::Uniswap,
            slice: SliceIndex::WHOLE,
            tokens: tokens.clone(),
            scores: vec![0.085, 0.991, 0.088],
            iterations: 1,
            converged: true,
        };
        let top: Vec<_> = top_k(&cv, 2).into_iter().map(|(t, _)| t).collect();
        assert_eq!(top, vec![tok(2), tok(3)]);
        assert_eq!(top_k(&cv, 10).len(), 3);
        let flat = CentralityVector { scores: vec![0.5; 3], ..cv };
        let top: Vec<_> = top_k(&flat, 2).into_iter().map(|(t, _)| t).collect();
        assert_eq!(top, vec![tok(1), tok(2)]);
    }

    #[test]
    fn series_normalization() {
        let g = graph(&[(0, 1, 2), (1, 2, 2)]);
        let series: Vec<TokenGraph> = (1..=4)
            .map(|i| TokenGraph::from_edges(Platform::Uniswap, SliceIndex(i), true, g.edges().map(|(a, b, w)| (g.node(a).clone(), g.node(b).clone(), w))).unwrap())
            .collect();
        let ts = centrality_time_series(&series, &tok(1)).unwrap();
        for p in &ts.points {
            assert!((p.normalized.unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(matches!(centrality_time_series(&series, &tok(9)), Err(Error::EmptySeries(_))));

        let mut sparse = vec![TokenGraph::empty(Platform::Uniswap, SliceIndex(1), true)];
        sparse.push(series[1].clone());
        let ts = centrality_time_series(&sparse, &tok(0)).unwrap();
        assert_eq!(ts.points[0].normalized, None);
        assert_eq!(ts.points[1].normalized, Some(1.0));
    }

    #[test]
    fn anomalies_need_threshold_above_one() {
        let params = AnomalyParams { threshold: 1.0, ..Default::default() };
        assert!(detect_anomalies(&[], &params).is_err());
    }

    #[test]
    fn constant_series_has_no_flags() {
        let series: Vec<TokenGraph> = (1..=8)
            .map(|i| {
                TokenGraph::from_edges(
                    Platform::Uniswap,
                    SliceIndex(i),
                    true,
                    (1..10).map(|k| (tok(0), tok(k), k)),
                )
                .unwrap()
            })
            .collect();
        let flags = detect_anomalies(&series, &AnomalyParams { exclude_global_top: 0, ..Default::default() }).unwrap();
        assert!(flags.is_empty());
    }
}
