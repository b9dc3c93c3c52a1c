//! File formats: the graph bundle written by `build`, GraphML for Gephi,
//! CSV plot data and run manifests.

pub mod graphml;
pub mod manifest;
pub mod reports;

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TokenGraph;
use crate::model::{Address, BlockRange, Platform, SliceIndex, TimeSegmentation, TokenId};

pub use graphml::to_graphml;
pub use manifest::AnalysisReport;
pub use reports::ReportSet;

const BUNDLE_FORMAT: &str = "dexnet-graph";
const BUNDLE_VERSION: u32 = 1;

/// The whole-range graph plus one graph per slice, as produced by `build`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBundle {
    pub segmentation: TimeSegmentation,
    pub whole: TokenGraph,
    /// Slices `t_1 ..= t_n` in order.
    pub series: Vec<TokenGraph>,
}

impl GraphBundle {
    pub fn new(segmentation: TimeSegmentation, whole: TokenGraph, series: Vec<TokenGraph>) -> Result<Self> {
        if series.len() != segmentation.n_segments() as usize {
            return Err(Error::MalformedGraph(format!(
                "{} slice graphs for {} segments",
                series.len(),
                segmentation.n_segments()
            )));
        }
        Ok(GraphBundle {
            segmentation,
            whole,
            series,
        })
    }

    pub fn platform(&self) -> &Platform {
        self.whole.platform()
    }

    pub fn weighted(&self) -> bool {
        self.whole.is_weighted()
    }

    pub fn graph(&self, slice: SliceIndex) -> Result<&TokenGraph> {
        if slice.is_whole() {
            return Ok(&self.whole);
        }
        self.series.get(slice.0 as usize - 1).ok_or(Error::SliceOutOfRange {
            slice: slice.0,
            n_segments: self.segmentation.n_segments(),
        })
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        let mut table: Vec<TokenId> = std::iter::once(&self.whole)
            .chain(self.series.iter())
            .flat_map(|g| g.nodes().iter().cloned())
            .collect();
        table.sort();
        table.dedup();
        let pos = |a: &Address| table.binary_search_by(|t| t.address.cmp(a)).unwrap();
        let encode = |g: &TokenGraph| StoredGraph {
            slice: g.slice(),
            nodes: g.nodes().iter().map(|t| pos(&t.address)).collect(),
            edges: g
                .edges()
                .map(|(i, j, w)| (pos(&g.node(i).address), pos(&g.node(j).address), w))
                .collect(),
        };
        let stored = StoredBundle {
            format: BUNDLE_FORMAT.to_string(),
            version: BUNDLE_VERSION,
            platform: self.platform().clone(),
            weighted: self.weighted(),
            range: self.segmentation.range(),
            boundaries: self.segmentation.boundaries().to_vec(),
            tokens: table
                .iter()
                .map(|t| StoredToken {
                    address: t.address,
                    symbol: t.symbol.clone(),
                })
                .collect(),
            graphs: std::iter::once(&self.whole).chain(self.series.iter()).map(encode).collect(),
        };
        serde_json::to_writer(out, &stored)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        let stored: StoredBundle = serde_json::from_reader(input)?;
        if stored.format != BUNDLE_FORMAT || stored.version != BUNDLE_VERSION {
            return Err(Error::MalformedGraph(format!(
                "unsupported graph file {} v{}",
                stored.format, stored.version
            )));
        }
        let segmentation = TimeSegmentation::from_boundaries(stored.range, stored.boundaries)?;
        let token = |i: usize| -> Result<TokenId> {
            stored
                .tokens
                .get(i)
                .map(|t| TokenId {
                    address: t.address,
                    symbol: t.symbol.clone(),
                })
                .ok_or_else(|| Error::MalformedGraph(format!("token index {i} out of range")))
        };
        let mut graphs = Vec::with_capacity(stored.graphs.len());
        for (k, sg) in stored.graphs.iter().enumerate() {
            if sg.slice.0 as usize != k {
                return Err(Error::MalformedGraph(format!("graph {k} is tagged as slice {}", sg.slice)));
            }
            let nodes = sg.nodes.iter().map(|&i| token(i)).collect::<Result<Vec<_>>>()?;
            let edges = sg
                .edges
                .iter()
                .map(|&(i, j, w)| Ok((token(i)?.address, token(j)?.address, w)))
                .collect::<Result<Vec<_>>>()?;
            graphs.push(TokenGraph::from_parts(stored.platform.clone(), sg.slice, stored.weighted, nodes, edges)?);
        }
        if graphs.is_empty() {
            return Err(Error::MalformedGraph("graph file holds no graphs".into()));
        }
        let whole = graphs.remove(0);
        GraphBundle::new(segmentation, whole, graphs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let out = crate::ingest::create_output(path)?;
        self.write_json(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_json(crate::ingest::open_input(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct StoredToken {
    address: Address,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    symbol: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct StoredGraph {
    slice: SliceIndex,
    nodes: Vec<usize>,
    edges: Vec<(usize, usize, u64)>,
}

#[derive(Serialize, Deserialize)]
struct StoredBundle {
    format: String,
    version: u32,
    platform: Platform,
    weighted: bool,
    range: BlockRange,
    boundaries: Vec<u64>,
    tokens: Vec<StoredToken>,
    graphs: Vec<StoredGraph>,
}
