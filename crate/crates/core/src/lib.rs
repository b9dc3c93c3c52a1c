//! Token-to-token networks reconstructed from DEX pool transfers, with
//! structural metrics, eigenvector centrality over time slices, power-law
//! fitting of degree distributions, community detection and exporters.

pub mod analytics;
pub mod centrality;
pub mod communities;
pub mod error;
pub mod export;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod statfit;
pub mod synth;

pub use error::{Error, Result};
pub use graph::TokenGraph;
pub use model::{Address, BlockRange, Platform, SliceIndex, TimeSegmentation, TokenId};
