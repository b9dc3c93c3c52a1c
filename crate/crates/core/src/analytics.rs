//! Structural metrics on token graphs. Everything here looks at edge
//! presence only; weights matter for centrality and communities, not for
//! degree, density or distances.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::TokenGraph;
use crate::model::SliceIndex;

/// Exact non-negative fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Rational {
    pub num: u128,
    pub den: u128,
}

impl Rational {
    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Rational `2|E| / |V|`.
pub fn average_degree(g: &TokenGraph) -> Result<Rational> {
    average_degree_of(g.node_count(), g.edge_count())
}

pub fn average_degree_of(nodes: usize, edges: usize) -> Result<Rational> {
    if nodes == 0 {
        return Err(Error::UndefinedMetric {
            metric: "average degree",
            reason: "graph has no nodes".into(),
        });
    }
    Ok(Rational {
        num: 2 * edges as u128,
        den: nodes as u128,
    })
}

/// `|E| / C(|V|, 2)`.
pub fn density(g: &TokenGraph) -> Result<Rational> {
    density_of(g.node_count(), g.edge_count())
}

pub fn density_of(nodes: usize, edges: usize) -> Result<Rational> {
    if nodes < 2 {
        return Err(Error::UndefinedMetric {
            metric: "density",
            reason: format!("needs at least 2 nodes, graph has {nodes}"),
        });
    }
    let n = nodes as u128;
    Ok(Rational {
        num: edges as u128,
        den: n * (n - 1) / 2,
    })
}

/// Connected components, largest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentDecomposition {
    /// Node indices of each component, each list ascending. Ordered by size
    /// descending, ties by smallest member address.
    pub components: Vec<Vec<usize>>,
}

impl ComponentDecomposition {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn giant(&self) -> Option<&[usize]> {
        self.components.first().map(Vec::as_slice)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.components.iter().map(Vec::len).collect()
    }
}

pub fn connected_components(g: &TokenGraph) -> ComponentDecomposition {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        queue.push_back(root);
        let mut members = Vec::new();
        while let Some(v) = queue.pop_front() {
            members.push(v);
            for &(u, _) in g.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    // node indices follow address order, so members[0] is the smallest address
    components.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    ComponentDecomposition { components }
}

/// Induced subgraph on the largest component.
pub fn giant_component(g: &TokenGraph) -> TokenGraph {
    match connected_components(g).giant() {
        Some(members) => g.induced(members),
        None => g.clone(),
    }
}

/// BFS distances from `source`; `usize::MAX` marks unreachable nodes.
pub fn bfs_distances(g: &TokenGraph, source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.node_count()];
    let mut queue = VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    while let Some(v) = queue.pop_front() {
        let d = dist[v] + 1;
        for &(u, _) in g.neighbors(v) {
            if dist[u] == usize::MAX {
                dist[u] = d;
                queue.push_back(u);
            }
        }
    }
    dist
}

fn eccentricity(g: &TokenGraph, source: usize) -> usize {
    bfs_distances(g, source).into_iter().max().unwrap_or(0)
}

/// Exact diameter of a connected graph.
///
/// Uses the iFUB scheme: one BFS from a high-degree node fixes fringe
/// levels, and eccentricities of fringe nodes are only computed until the
/// lower bound exceeds twice the next level, which bounds every remaining
/// pair. The result equals the all-pairs eccentricity maximum.
pub fn diameter(g: &TokenGraph) -> Result<usize> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::UndefinedMetric {
            metric: "diameter",
            reason: "graph has no nodes".into(),
        });
    }
    let components = connected_components(g).len();
    if components > 1 {
        return Err(Error::NotConnected { components });
    }
    let start = (0..n).max_by_key(|&i| (g.degree(i), std::cmp::Reverse(i))).unwrap();
    let dist = bfs_distances(g, start);
    let ecc_start = dist.iter().copied().max().unwrap_or(0);
    let mut levels: Vec<Vec<usize>> = vec![Vec::new(); ecc_start + 1];
    for (v, &d) in dist.iter().enumerate() {
        levels[d].push(v);
    }

    let mut lower = ecc_start;
    let mut level = ecc_start;
    while level > 0 {
        let fringe_max = levels[level].iter().map(|&v| eccentricity(g, v)).max().unwrap_or(0);
        lower = lower.max(fringe_max);
        // Any pair with both endpoints above `level` is within 2 * (level - 1).
        if lower >= 2 * (level - 1) {
            return Ok(lower);
        }
        level -= 1;
    }
    Ok(lower)
}

/// Lower bound on the diameter from BFS at `seeds` randomly chosen nodes,
/// for graphs too large for the exact computation. Works on disconnected
/// graphs (largest finite eccentricity seen).
pub fn diameter_lower_bound(g: &TokenGraph, seeds: usize, rng_seed: u64) -> usize {
    let n = g.node_count();
    if n == 0 {
        return 0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let picks = sample(&mut rng, n, seeds.clamp(1, n));
    let mut best = 0;
    for s in picks.iter() {
        let dist = bfs_distances(g, s);
        // double sweep: also BFS from the farthest node reached
        let (far, d) = dist
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != usize::MAX)
            .max_by_key(|&(i, &d)| (d, std::cmp::Reverse(i)))
            .map(|(i, &d)| (i, d))
            .unwrap();
        best = best.max(d);
        let back = bfs_distances(g, far).into_iter().filter(|&d| d != usize::MAX).max().unwrap_or(0);
        best = best.max(back);
    }
    best
}

/// Degree → number of nodes with that degree.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct DegreeHistogram {
    pub counts: BTreeMap<usize, usize>,
}

impl DegreeHistogram {
    pub fn from_degrees<I: IntoIterator<Item = usize>>(degrees: I) -> Self {
        let mut counts = BTreeMap::new();
        for d in degrees {
            *counts.entry(d).or_insert(0) += 1;
        }
        DegreeHistogram { counts }
    }

    pub fn total_nodes(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.counts.keys().next_back().copied()
    }
}

/// Histogram of unweighted degrees. Isolated nodes, which only appear after
/// degree filtering, are counted under degree 0.
pub fn degree_distribution(g: &TokenGraph) -> DegreeHistogram {
    DegreeHistogram::from_degrees((0..g.node_count()).map(|i| g.degree(i)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallWorldReport {
    pub n: usize,
    pub giant_size: usize,
    pub diameter_of_giant: usize,
    pub ln_n: f64,
    /// `diameter / ln(n)`
    pub ratio: f64,
}

/// Diameter of the giant component next to `ln |V|`.
pub fn small_world_report(g: &TokenGraph) -> Result<SmallWorldReport> {
    let giant = giant_component(g);
    if giant.node_count() < 2 {
        return Err(Error::UndefinedMetric {
            metric: "small-world report",
            reason: "giant component has fewer than 2 nodes".into(),
        });
    }
    let d = diameter(&giant)?;
    Ok(small_world_from(g.node_count(), giant.node_count(), d))
}

pub fn small_world_from(n: usize, giant_size: usize, diameter: usize) -> SmallWorldReport {
    let ln_n = (n as f64).ln();
    SmallWorldReport {
        n,
        giant_size,
        diameter_of_giant: diameter,
        ln_n,
        ratio: diameter as f64 / ln_n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioPoint {
    pub slice: SliceIndex,
    pub nodes: usize,
    pub edges: usize,
    pub ratio: f64,
}

/// Per-slice `|E| / |V|` with mean and population variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSeries {
    pub values: Vec<RatioPoint>,
    /// Slices skipped because their graph has no nodes.
    pub empty_slices: usize,
    pub mean: f64,
    pub variance: f64,
}

pub fn ratio_series(series: &[TokenGraph]) -> Result<RatioSeries> {
    let values: Vec<RatioPoint> = series
        .iter()
        .filter(|g| g.node_count() > 0)
        .map(|g| RatioPoint {
            slice: g.slice(),
            nodes: g.node_count(),
            edges: g.edge_count(),
            ratio: g.edge_count() as f64 / g.node_count() as f64,
        })
        .collect();
    if values.is_empty() {
        return Err(Error::UndefinedMetric {
            metric: "ratio series",
            reason: "every slice is empty".into(),
        });
    }
    let (mean, variance) = mean_and_population_variance(values.iter().map(|p| p.ratio));
    Ok(RatioSeries {
        empty_slices: series.len() - values.len(),
        values,
        mean,
        variance,
    })
}

/// Two-pass mean and population variance.
pub fn mean_and_population_variance<I>(values: I) -> (f64, f64)
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let it = values.into_iter();
    let n = it.clone().count() as f64;
    let mean = it.clone().sum::<f64>() / n;
    let var = it.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}
