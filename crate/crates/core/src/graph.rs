//! Undirected token graphs built from edge events, for the whole block range
//! or a single slice, weighted by transfer count or reduced to edge presence.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::ingest::EdgeEvent;
use crate::model::{slice_of_block, Address, Platform, SliceIndex, TimeSegmentation, TokenId};

/// Immutable undirected token graph. Nodes are indexed densely in address
/// order; adjacency lists are sorted by neighbor index.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenGraph {
    platform: Platform,
    slice: SliceIndex,
    weighted: bool,
    nodes: Vec<TokenId>,
    adjacency: Vec<Vec<(usize, u64)>>,
    edge_count: usize,
}

impl TokenGraph {
    /// Builds a graph from an explicit node set and edge list. Parallel edges
    /// between the same pair are summed; unweighted graphs store weight 1.
    pub fn from_parts<N, E>(platform: Platform, slice: SliceIndex, weighted: bool, nodes: N, edges: E) -> Result<Self>
    where
        N: IntoIterator<Item = TokenId>,
        E: IntoIterator<Item = (Address, Address, u64)>,
    {
        let mut node_map: BTreeMap<Address, TokenId> = BTreeMap::new();
        for token in nodes {
            match node_map.get_mut(&token.address) {
                Some(existing) if existing.symbol.is_none() => existing.symbol = token.symbol,
                Some(_) => {}
                None => {
                    node_map.insert(token.address, token);
                }
            }
        }
        let nodes: Vec<TokenId> = node_map.into_values().collect();
        let index: HashMap<Address, usize> = nodes.iter().enumerate().map(|(i, t)| (t.address, i)).collect();

        let mut weights: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for (x, y, w) in edges {
            if x == y {
                return Err(Error::MalformedGraph(format!("self-loop on {x}")));
            }
            if w == 0 {
                return Err(Error::MalformedGraph(format!("zero weight on edge {x}-{y}")));
            }
            let (Some(&i), Some(&j)) = (index.get(&x), index.get(&y)) else {
                return Err(Error::MalformedGraph(format!("edge {x}-{y} has an endpoint outside the node set")));
            };
            let key = (i.min(j), i.max(j));
            let slot = weights.entry(key).or_insert(0);
            *slot = if weighted { *slot + w } else { 1 };
        }

        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (&(i, j), &w) in &weights {
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(TokenGraph {
            platform,
            slice,
            weighted,
            nodes,
            adjacency,
            edge_count: weights.len(),
        })
    }

    /// A graph whose node set is exactly the edge endpoints.
    pub fn from_edges<E>(platform: Platform, slice: SliceIndex, weighted: bool, edges: E) -> Result<Self>
    where
        E: IntoIterator<Item = (TokenId, TokenId, u64)>,
    {
        let edges: Vec<(TokenId, TokenId, u64)> = edges.into_iter().collect();
        let nodes: Vec<TokenId> = edges.iter().flat_map(|(a, b, _)| [a.clone(), b.clone()]).collect();
        Self::from_parts(
            platform,
            slice,
            weighted,
            nodes,
            edges.into_iter().map(|(a, b, w)| (a.address, b.address, w)),
        )
    }

    pub fn empty(platform: Platform, slice: SliceIndex, weighted: bool) -> Self {
        TokenGraph {
            platform,
            slice,
            weighted,
            nodes: Vec::new(),
            adjacency: Vec::new(),
            edge_count: 0,
        }
    }

    pub fn platform(&self) -> &Platform {
        &self.platform
    }

    pub fn slice(&self) -> SliceIndex {
        self.slice
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Tokens in address order; position is the node index.
    pub fn nodes(&self) -> &[TokenId] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &TokenId {
        &self.nodes[idx]
    }

    pub fn index_of(&self, address: &Address) -> Option<usize> {
        self.nodes.binary_search_by(|t| t.address.cmp(address)).ok()
    }

    pub fn contains(&self, token: &TokenId) -> bool {
        self.index_of(&token.address).is_some()
    }

    /// `(neighbor index, weight)` pairs sorted by neighbor.
    pub fn neighbors(&self, idx: usize) -> &[(usize, u64)] {
        &self.adjacency[idx]
    }

    /// Unweighted degree (neighbor count).
    pub fn degree(&self, idx: usize) -> usize {
        self.adjacency[idx].len()
    }

    pub fn weighted_degree(&self, idx: usize) -> u64 {
        self.adjacency[idx].iter().map(|&(_, w)| w).sum()
    }

    /// Each undirected edge once, as `(i, j, weight)` with `i < j`, in index order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&(j, _)| j > i).map(move |&(j, w)| (i, j, w)))
    }

    pub fn edge_weight(&self, a: &Address, b: &Address) -> Option<u64> {
        let i = self.index_of(a)?;
        let j = self.index_of(b)?;
        self.adjacency[i]
            .binary_search_by(|&(n, _)| n.cmp(&j))
            .ok()
            .map(|pos| self.adjacency[i][pos].1)
    }

    pub fn total_weight(&self) -> u64 {
        self.edges().map(|(_, _, w)| w).sum()
    }

    /// Edge map keyed by canonical address pair, for comparisons.
    pub fn edge_map(&self) -> BTreeMap<(Address, Address), u64> {
        self.edges()
            .map(|(i, j, w)| ((self.nodes[i].address, self.nodes[j].address), w))
            .collect()
    }

    /// Induced subgraph on the given node indices.
    pub fn induced(&self, keep: &[usize]) -> TokenGraph {
        let mut mask = vec![false; self.nodes.len()];
        for &i in keep {
            mask[i] = true;
        }
        let nodes = keep.iter().map(|&i| self.nodes[i].clone());
        let edges: Vec<(Address, Address, u64)> = self
            .edges()
            .filter(|&(i, j, _)| mask[i] && mask[j])
            .map(|(i, j, w)| (self.nodes[i].address, self.nodes[j].address, w))
            .collect();
        TokenGraph::from_parts(self.platform.clone(), self.slice, self.weighted, nodes, edges)
            .expect("induced subgraph of a valid graph is valid")
    }

    /// Same structure with every weight set to 1.
    pub fn to_unweighted(&self) -> TokenGraph {
        let mut g = self.clone();
        g.weighted = false;
        for list in &mut g.adjacency {
            for entry in list.iter_mut() {
                entry.1 = 1;
            }
        }
        g
    }
}

fn accumulate(
    counts: &mut HashMap<(Address, Address), u64>,
    symbols: &mut HashMap<Address, Option<String>>,
    ev: &EdgeEvent,
) {
    *counts.entry((ev.a.address, ev.b.address)).or_insert(0) += 1;
    for t in [&ev.a, &ev.b] {
        let slot = symbols.entry(t.address).or_insert(None);
        if slot.is_none() {
            slot.clone_from(&t.symbol);
        }
    }
}

fn finish(
    platform: &Platform,
    slice: SliceIndex,
    weighted: bool,
    counts: HashMap<(Address, Address), u64>,
    symbols: HashMap<Address, Option<String>>,
) -> TokenGraph {
    let nodes = symbols.into_iter().map(|(address, symbol)| TokenId { address, symbol });
    TokenGraph::from_parts(platform.clone(), slice, weighted, nodes, counts.into_iter().map(|((a, b), w)| (a, b, w)))
        .expect("events are canonical pairs of distinct tokens")
}

/// Builds the graph of one slice (slice 0 = every event in the range).
/// Events tagged with another platform are ignored.
pub fn build_graph(
    events: &[EdgeEvent],
    seg: &TimeSegmentation,
    slice: SliceIndex,
    platform: &Platform,
    weighted: bool,
) -> Result<TokenGraph> {
    seg.bounds(slice)?;
    let mut counts = HashMap::new();
    let mut symbols = HashMap::new();
    for ev in events
        .iter()
        .filter(|ev| &ev.platform == platform && seg.contains(slice, ev.block))
    {
        accumulate(&mut counts, &mut symbols, ev);
    }
    Ok(finish(platform, slice, weighted, counts, symbols))
}

/// One graph per slice `t_1 ..= t_n`, empty slices included.
pub fn slice_series(
    events: &[EdgeEvent],
    seg: &TimeSegmentation,
    platform: &Platform,
    weighted: bool,
) -> Vec<TokenGraph> {
    let n = seg.n_segments() as usize;
    let mut counts: Vec<HashMap<(Address, Address), u64>> = vec![HashMap::new(); n];
    let mut symbols: Vec<HashMap<Address, Option<String>>> = vec![HashMap::new(); n];
    for ev in events.iter().filter(|ev| &ev.platform == platform) {
        if let Ok(s) = slice_of_block(seg, ev.block) {
            let i = s.0 as usize - 1;
            accumulate(&mut counts[i], &mut symbols[i], ev);
        }
    }
    counts
        .into_iter()
        .zip(symbols)
        .enumerate()
        .map(|(i, (c, s))| finish(platform, SliceIndex(i as u32 + 1), weighted, c, s))
        .collect()
}

/// Merges a slice series back into one whole-range graph: weights add up on
/// weighted series, edge sets unite on unweighted ones.
pub fn recombine(series: &[TokenGraph]) -> Result<TokenGraph> {
    let Some(first) = series.first() else {
        return Ok(TokenGraph::empty(Platform::Other("none".into()), SliceIndex::WHOLE, true));
    };
    if let Some(g) = series.iter().find(|g| g.platform() != first.platform() || g.is_weighted() != first.is_weighted()) {
        return Err(Error::MalformedGraph(format!(
            "cannot recombine {} slice {} with {} slice {}",
            first.platform(),
            first.slice(),
            g.platform(),
            g.slice()
        )));
    }
    let nodes = series.iter().flat_map(|g| g.nodes().iter().cloned());
    let edges: Vec<(Address, Address, u64)> = series
        .iter()
        .flat_map(|g| g.edges().map(move |(i, j, w)| (g.node(i).address, g.node(j).address, w)))
        .collect();
    TokenGraph::from_parts(first.platform().clone(), SliceIndex::WHOLE, first.is_weighted(), nodes, edges)
}

/// Keeps nodes whose degree in `g` is at least `min_degree`, plus the edges
/// among them. A single pass: degrees are not recomputed after removal.
pub fn filter_min_degree(g: &TokenGraph, min_degree: usize) -> TokenGraph {
    let keep: Vec<usize> = (0..g.node_count()).filter(|&i| g.degree(i) >= min_degree).collect();
    g.induced(&keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{segment_blocks, BlockRange};
    use proptest::prelude::*;

    fn tok(i: u64) -> TokenId {
        TokenId::new(Address::from_low_u64(i))
    }

    fn ev(block: u64, x: u64, y: u64) -> EdgeEvent {
        EdgeEvent::new(block, tok(x), tok(y), Platform::Uniswap).unwrap()
    }

    fn seg100() -> TimeSegmentation {
        segment_blocks(BlockRange::new(0, 99).unwrap(), 10).unwrap()
    }

    fn graph(edges: &[(u64, u64)]) -> TokenGraph {
        TokenGraph::from_edges(
            Platform::Uniswap,
            SliceIndex::WHOLE,
            false,
            edges.iter().map(|&(a, b)| (tok(a), tok(b), 1)),
        )
        .unwrap()
    }

    #[test]
    fn weighted_counts() {
        let events = vec![ev(1, 1, 2), ev(2, 2, 1), ev(3, 1, 2), ev(4, 2, 3)];
        let g = build_graph(&events, &seg100(), SliceIndex::WHOLE, &Platform::Uniswap, true).unwrap();
        assert_eq!(g.edge_weight(&tok(1).address, &tok(2).address), Some(3));
        assert_eq!(g.edge_weight(&tok(3).address, &tok(2).address), Some(1));
        assert_eq!(g.edge_count(), 2);
        let u = build_graph(&events, &seg100(), SliceIndex::WHOLE, &Platform::Uniswap, false).unwrap();
        assert_eq!(u.edge_weight(&tok(1).address, &tok(2).address), Some(1));
        assert_eq!(u.edge_weight(&tok(2).address, &tok(3).address), Some(1));
    }

    #[test]
    fn slice_filter() {
        let events = vec![ev(5, 1, 2), ev(95, 3, 4)];
        let g = build_graph(&events, &seg100(), SliceIndex(1), &Platform::Uniswap, true).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(g.contains(&tok(1)));
        assert!(!g.contains(&tok(3)));
        assert!(build_graph(&events, &seg100(), SliceIndex(11), &Platform::Uniswap, true).is_err());
    }

    #[test]
    fn other_platform_events_ignored() {
        let mut events = vec![ev(5, 1, 2)];
        events.push(EdgeEvent::new(6, tok(3), tok(4), Platform::Sushiswap).unwrap());
        let g = build_graph(&events, &seg100(), SliceIndex::WHOLE, &Platform::Uniswap, true).unwrap();
        assert_eq!(g.node_count(), 2);
    }

    #[test]
    fn series_keeps_empty_slices() {
        let seg = segment_blocks(BlockRange::new(0, 29).unwrap(), 3).unwrap();
        let events = vec![ev(12, 1, 2), ev(15, 2, 3)];
        let series = slice_series(&events, &seg, &Platform::Uniswap, true);
        assert_eq!(series.len(), 3);
        assert!(series[0].is_empty());
        assert_eq!(series[1].edge_count(), 2);
        assert!(series[2].is_empty());
        assert_eq!(series[1].slice(), SliceIndex(2));
    }

    #[test]
    fn filter_star() {
        let g = graph(&[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let f = filter_min_degree(&g, 2);
        assert_eq!(f.node_count(), 1);
        assert_eq!(f.edge_count(), 0);
        assert_eq!(f.node(0), &tok(0));
    }

    #[test]
    fn filter_triangle_and_path() {
        let tri = graph(&[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(filter_min_degree(&tri, 2), tri);
        let path = graph(&[(0, 1), (1, 2)]);
        let f = filter_min_degree(&path, 2);
        assert_eq!(f.node_count(), 1);
        assert_eq!(f.node(0), &tok(1));
        assert_eq!(f.edge_count(), 0);
    }

    #[test]
    fn rejects_bad_parts() {
        let n = [tok(1), tok(2)];
        assert!(TokenGraph::from_parts(Platform::Uniswap, SliceIndex::WHOLE, true, n.clone(), [(tok(1).address, tok(1).address, 1)]).is_err());
        assert!(TokenGraph::from_parts(Platform::Uniswap, SliceIndex::WHOLE, true, n.clone(), [(tok(1).address, tok(3).address, 1)]).is_err());
        assert!(TokenGraph::from_parts(Platform::Uniswap, SliceIndex::WHOLE, true, n, [(tok(1).address, tok(2).address, 0)]).is_err());
    }

    fn events_strategy() -> impl Strategy<Value = Vec<EdgeEvent>> {
        proptest::collection::vec((0u64..100, 0u64..12, 0u64..12), 0..150).prop_map(|raw| {
            raw.into_iter()
                .filter_map(|(b, x, y)| EdgeEvent::new(b, tok(x), tok(y), Platform::Uniswap))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn graph_invariants(events in events_strategy()) {
            let g = build_graph(&events, &seg100(), SliceIndex::WHOLE, &Platform::Uniswap, true).unwrap();
            for (i, j, w) in g.edges() {
                prop_assert!(i != j && w >= 1);
                let back = g.neighbors(j).iter().find(|&&(n, _)| n == i).map(|&(_, w)| w);
                prop_assert_eq!(back, Some(w));
            }
            for i in 0..g.node_count() {
                prop_assert!(g.degree(i) >= 1);
            }
            prop_assert_eq!(g.total_weight() as usize, events.len());
            // support
            let u = build_graph(&events, &seg100(), SliceIndex::WHOLE, &Platform::Uniswap, false).unwrap();
            let support: Vec<_> = g.edge_map().keys().cloned().collect();
            let unweighted: Vec<_> = u.edge_map().into_iter().map(|(k, w)| { assert_eq!(w, 1); k }).collect();
            prop_assert_eq!(support, unweighted);
            // node set = tokens incident to events
            let mut incident: Vec<Address> = events.iter().flat_map(|e| [e.a.address, e.b.address]).collect();
            incident.sort();
            incident.dedup();
            let nodes: Vec<Address> = g.nodes().iter().map(|t| t.address).collect();
            prop_assert_eq!(nodes, incident);
        }

        #[test]
        fn slices_recombine(events in events_strategy()) {
            let seg = seg100();
            let whole = build_graph(&events, &seg, SliceIndex::WHOLE, &Platform::Uniswap, true).unwrap();
            let mut summed: BTreeMap<(Address, Address), u64> = BTreeMap::new();
            for g in slice_series(&events, &seg, &Platform::Uniswap, true) {
                for (k, w) in g.edge_map() {
                    *summed.entry(k).or_insert(0) += w;
                }
            }
            prop_assert_eq!(summed, whole.edge_map());
        }
    }
}
