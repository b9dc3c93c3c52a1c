//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library except to build `TokenGraph` values from raw edges.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use dexnet::ingest::EdgeEvent;
use dexnet::model::segment_blocks;
use dexnet::{Address, BlockRange, Platform, SliceIndex, TokenGraph, TokenId};
use rand::Rng;

pub fn tok(i: usize) -> TokenId {
    TokenId::new(Address::from_low_u64(i as u64 + 1))
}

/// Simple graph on `0..n`; edges are `(i, j, w)` with `i < j`, no repeats.
#[derive(Debug, Clone)]
pub struct RawGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, u64)>,
}

impl RawGraph {
    /// Node `i` gets index `i` in the token graph since addresses follow `i`.
    pub fn to_graph(&self, weighted: bool) -> TokenGraph {
        TokenGraph::from_parts(
            Platform::Uniswap,
            SliceIndex::WHOLE,
            weighted,
            (0..self.n).map(tok),
            self.edges.iter().map(|&(i, j, w)| (tok(i).address, tok(j).address, w)),
        )
        .unwrap()
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for &(i, j, w) in &self.edges {
            a[i][j] = w as f64;
            a[j][i] = w as f64;
        }
        a
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2 as f64).sum()
    }
}

pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64, max_w: u64) -> RawGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j, rng.random_range(1..=max_w)));
            }
        }
    }
    RawGraph { n, edges }
}

/// Random spanning tree plus extra edges with probability `p`.
pub fn random_connected<R: Rng>(rng: &mut R, n: usize, p: f64, max_w: u64) -> RawGraph {
    let mut present = BTreeSet::new();
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        present.insert((u, v));
        edges.push((u, v, rng.random_range(1..=max_w)));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !present.contains(&(i, j)) && rng.random::<f64>() < p {
                edges.push((i, j, rng.random_range(1..=max_w)));
            }
        }
    }
    RawGraph { n, edges }
}

/// Components by union-find, members ascending, ordered by size descending
/// then smallest member.
pub fn brute_components(g: &RawGraph) -> Vec<Vec<usize>> {
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut y = x;
        while parent[y] != r {
            let next = parent[y];
            parent[y] = r;
            y = next;
        }
        r
    }
    let mut parent: Vec<usize> = (0..g.n).collect();
    for &(i, j, _) in &g.edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        parent[a.max(b)] = a.min(b);
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..g.n {
        let r = find(&mut parent, v);
        groups.entry(r).or_default().push(v);
    }
    let mut comps: Vec<Vec<usize>> = groups.into_values().collect();
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    comps
}

/// All-pairs hop distances by Floyd-Warshall; `None` = unreachable.
#[allow(clippy::needless_range_loop)]
pub fn floyd(g: &RawGraph) -> Vec<Vec<Option<usize>>> {
    let n = g.n;
    let mut d = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for &(i, j, _) in &g.edges {
        d[i][j] = Some(1);
        d[j][i] = Some(1);
    }
    for k in 0..n {
        for i in 0..n {
            let Some(ik) = d[i][k] else { continue };
            for j in 0..n {
                if let Some(kj) = d[k][j] {
                    if d[i][j].is_none_or(|ij| ik + kj < ij) {
                        d[i][j] = Some(ik + kj);
                    }
                }
            }
        }
    }
    d
}

/// Largest finite distance, or `None` when some pair is unreachable.
pub fn brute_diameter(g: &RawGraph) -> Option<usize> {
    let d = floyd(g);
    let mut best = 0;
    for row in &d {
        for x in row {
            best = best.max((*x)?);
        }
    }
    Some(best)
}

pub fn brute_degree_histogram(g: &RawGraph) -> BTreeMap<usize, usize> {
    let mut deg = vec![0usize; g.n];
    for &(i, j, _) in &g.edges {
        deg[i] += 1;
        deg[j] += 1;
    }
    let mut h = BTreeMap::new();
    for d in deg {
        *h.entry(d).or_insert(0) += 1;
    }
    h
}

/// Dominant eigenpair from a dense symmetric eigendecomposition, sign chosen
/// so the entries sum to a non-negative value.
pub fn dense_dominant(g: &RawGraph) -> (f64, Vec<f64>) {
    let dense = g.dense();
    let a = nalgebra::DMatrix::from_fn(g.n, g.n, |i, j| dense[i][j]);
    let eig = nalgebra::SymmetricEigen::new(a);
    let (k, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    for x in &mut v {
        *x *= sign / norm;
    }
    (lambda, v)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, eps, 50)
}

/// Student-t upper tail by numerically integrating the density over `[0, |t|]`.
pub fn t_sf_quadrature(t: f64, df: usize) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let v = df as f64;
    let log_c = ln_gamma((v + 1.0) / 2.0) - ln_gamma(v / 2.0) - 0.5 * (v * std::f64::consts::PI).ln();
    let pdf = move |x: f64| (log_c - (v + 1.0) / 2.0 * (1.0 + x * x / v).ln()).exp();
    let central = adaptive_simpson(&pdf, 0.0, t.abs(), 1e-15);
    if t >= 0.0 {
        0.5 - central
    } else {
        0.5 + central
    }
}

/// Every set partition of `0..n` as a restricted growth string.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        let next_new = cur.iter().max().map_or(0, |m| m + 1);
        for l in 0..=next_new {
            cur.push(l);
            rec(n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, &mut Vec::with_capacity(n), &mut out);
    out
}

/// `Q = 1/(2W) sum_ij [A_ij - r k_i k_j / 2W] delta(c_i, c_j)` by direct
/// double summation.
pub fn brute_modularity(g: &RawGraph, labels: &[usize], resolution: f64) -> f64 {
    let two_w = 2.0 * g.total_weight();
    if two_w == 0.0 {
        return 0.0;
    }
    let a = g.dense();
    let k: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let mut q = 0.0;
    for i in 0..g.n {
        for j in 0..g.n {
            if labels[i] == labels[j] {
                q += a[i][j] - resolution * k[i] * k[j] / two_w;
            }
        }
    }
    q / two_w
}

pub fn best_modularity(g: &RawGraph) -> f64 {
    set_partitions(g.n)
        .iter()
        .map(|p| brute_modularity(g, p, 1.0))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Events on tokens `0..n_tokens` spread over `[start, end]`.
pub fn random_events<R: Rng>(rng: &mut R, n_tokens: usize, n_events: usize, start: u64, end: u64) -> Vec<EdgeEvent> {
    let mut out = Vec::with_capacity(n_events);
    while out.len() < n_events {
        let a = rng.random_range(0..n_tokens);
        let b = rng.random_range(0..n_tokens);
        if let Some(ev) = EdgeEvent::new(rng.random_range(start..=end), tok(a), tok(b), Platform::Uniswap) {
            out.push(ev);
        }
    }
    out.sort_by_key(|e| e.block);
    out
}

/// Blocks 0..=1999 in 20 slices: a hub with six heavy partners every slice,
/// plus a light token whose traffic is ten times higher in `spike_slice`.
pub fn spike_fixture(spike_slice: u32) -> Vec<EdgeEvent> {
    let seg = segment_blocks(BlockRange::new(0, 1999).unwrap(), 20).unwrap();
    let mut events = Vec::new();
    for s in 1..=20u32 {
        let (lo, _) = seg.bounds(SliceIndex(s)).unwrap();
        let mut push = |a: usize, b: usize, count: usize| {
            for k in 0..count {
                events.push(EdgeEvent::new(lo + k as u64 % 100, tok(a), tok(b), Platform::Sushiswap).unwrap());
            }
        };
        for partner in 1..=6 {
            push(0, partner, 100);
        }
        push(1, 8, 3);
        push(0, 7, if s == spike_slice { 20 } else { 2 });
    }
    events.sort_by_key(|e| e.block);
    events
}
