//! Pool registries, transfer records and their resolution into token-pair
//! edge events.
//!
//! Fixture files are line-delimited JSON, optionally gzip-compressed (by a
//! `.gz` extension). Malformed lines are collected rather than aborting the
//! whole parse, up to a configurable error budget.

pub mod rpc;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{Address, BlockHeight, BlockRange, Platform, TokenId};

pub const DEFAULT_MAX_ERRORS: usize = 1000;

/// A liquidity pool pairing two distinct tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pool {
    pub address: Address,
    pub token0: TokenId,
    pub token1: TokenId,
    pub platform: Platform,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PoolRegistry {
    pools: BTreeMap<Address, Pool>,
}

impl PoolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a pool, replacing any previous entry with the same address.
    /// Returns the replaced pool.
    pub fn insert(&mut self, pool: Pool) -> Result<Option<Pool>> {
        if pool.token0 == pool.token1 {
            return Err(Error::InvalidParameter(format!(
                "pool {} pairs token {} with itself",
                pool.address, pool.token0
            )));
        }
        Ok(self.pools.insert(pool.address, pool))
    }

    pub fn get(&self, address: &Address) -> Option<&Pool> {
        self.pools.get(address)
    }

    pub fn len(&self) -> usize {
        self.pools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pools.is_empty()
    }

    /// Pools in address order.
    pub fn iter(&self) -> impl Iterator<Item = &Pool> {
        self.pools.values()
    }

    pub fn counts_by_platform(&self) -> BTreeMap<Platform, usize> {
        let mut counts = BTreeMap::new();
        for pool in self.pools.values() {
            *counts.entry(pool.platform.clone()).or_insert(0) += 1;
        }
        counts
    }

    pub fn merge(&mut self, other: PoolRegistry) {
        self.pools.extend(other.pools);
    }
}

/// One pool-touching transfer (swap, mint or burn) at a block height.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferRecord {
    pub block: BlockHeight,
    pub pool: Address,
    pub platform: Platform,
}

/// A transfer resolved to the unordered token pair of its pool, with `a < b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeEvent {
    pub block: BlockHeight,
    pub a: TokenId,
    pub b: TokenId,
    pub platform: Platform,
}

impl EdgeEvent {
    /// Canonicalizes the pair order. Returns `None` for a self-pair.
    pub fn new(block: BlockHeight, x: TokenId, y: TokenId, platform: Platform) -> Option<Self> {
        match x.cmp(&y) {
            std::cmp::Ordering::Less => Some(EdgeEvent { block, a: x, b: y, platform }),
            std::cmp::Ordering::Greater => Some(EdgeEvent { block, a: y, b: x, platform }),
            std::cmp::Ordering::Equal => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WarningKind {
    DuplicatePool,
    SelfPairedPool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineWarning {
    pub line: usize,
    pub kind: WarningKind,
    pub message: String,
}

/// A parsed value together with the per-line problems met along the way.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub value: T,
    pub errors: Vec<LineError>,
    pub warnings: Vec<LineWarning>,
}

impl<T> Parsed<T> {
    pub fn count(&self, kind: WarningKind) -> usize {
        self.warnings.iter().filter(|w| w.kind == kind).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Abort once more than this many lines fail to parse.
    pub max_errors: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            max_errors: DEFAULT_MAX_ERRORS,
        }
    }
}

struct ErrorBudget {
    errors: Vec<LineError>,
    max: usize,
}

impl ErrorBudget {
    fn push(&mut self, line: usize, message: String) -> Result<()> {
        self.errors.push(LineError { line, message });
        if self.errors.len() > self.max {
            let first = &self.errors[0];
            return Err(Error::TooManyParseErrors {
                count: self.errors.len(),
                first_line: first.line,
                first_message: first.message.clone(),
            });
        }
        Ok(())
    }
}

fn field_str<'a>(obj: &'a serde_json::Map<String, Value>, name: &str) -> std::result::Result<&'a str, String> {
    match obj.get(name) {
        Some(Value::String(s)) => Ok(s),
        Some(other) => Err(format!("field `{name}` must be a string, got {other}")),
        None => Err(format!("missing field `{name}`")),
    }
}

fn field_opt_str(obj: &serde_json::Map<String, Value>, name: &str) -> Option<String> {
    match obj.get(name) {
        Some(Value::String(s)) if !s.is_empty() => Some(s.clone()),
        _ => None,
    }
}

fn parse_object(line: &str) -> std::result::Result<serde_json::Map<String, Value>, String> {
    match serde_json::from_str::<Value>(line) {
        Ok(Value::Object(obj)) => Ok(obj),
        Ok(_) => Err("expected a JSON object".to_string()),
        Err(e) => Err(format!("invalid JSON: {e}")),
    }
}

enum PoolLine {
    Pool(Pool),
    SelfPaired(Address),
}

fn parse_pool_line(line: &str) -> std::result::Result<PoolLine, String> {
    let obj = parse_object(line)?;
    let address: Address = field_str(&obj, "pool")?.parse().map_err(|e: Error| e.to_string())?;
    let a0: Address = field_str(&obj, "token0")?.parse().map_err(|e: Error| e.to_string())?;
    let a1: Address = field_str(&obj, "token1")?.parse().map_err(|e: Error| e.to_string())?;
    let platform: Platform = field_str(&obj, "platform")?
        .parse()
        .map_err(|e: Error| e.to_string())?;
    if a0 == a1 {
        return Ok(PoolLine::SelfPaired(address));
    }
    Ok(PoolLine::Pool(Pool {
        address,
        token0: TokenId {
            address: a0,
            symbol: field_opt_str(&obj, "symbol0"),
        },
        token1: TokenId {
            address: a1,
            symbol: field_opt_str(&obj, "symbol1"),
        },
        platform,
    }))
}

/// Parses a line-delimited JSON pool registry. Duplicate pool addresses keep
/// the last entry; self-paired pools are rejected. Both produce warnings.
pub fn parse_pool_registry<R: BufRead>(input: R, options: ParseOptions) -> Result<Parsed<PoolRegistry>> {
    let mut registry = PoolRegistry::new();
    let mut budget = ErrorBudget {
        errors: Vec::new(),
        max: options.max_errors,
    };
    let mut warnings = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                budget.push(lineno, format!("unreadable line: {e}"))?;
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match parse_pool_line(&line) {
            Ok(PoolLine::Pool(pool)) => {
                let address = pool.address;
                if registry.insert(pool)?.is_some() {
                    warnings.push(LineWarning {
                        line: lineno,
                        kind: WarningKind::DuplicatePool,
                        message: format!("pool {address} redefined; keeping the later entry"),
                    });
                }
            }
            Ok(PoolLine::SelfPaired(address)) => warnings.push(LineWarning {
                line: lineno,
                kind: WarningKind::SelfPairedPool,
                message: format!("pool {address} pairs a token with itself; rejected"),
            }),
            Err(msg) => budget.push(lineno, msg)?,
        }
    }
    Ok(Parsed {
        value: registry,
        errors: budget.errors,
        warnings,
    })
}

fn parse_block(value: &Value) -> std::result::Result<BlockHeight, String> {
    match value {
        Value::Number(n) => n
            .as_u64()
            .ok_or_else(|| format!("block `{n}` is not a non-negative integer")),
        Value::String(s) => s
            .trim()
            .parse::<u64>()
            .map_err(|_| format!("block `{s}` is not numeric")),
        other => Err(format!("block `{other}` is not numeric")),
    }
}

fn parse_transfer_line(line: &str) -> std::result::Result<TransferRecord, String> {
    let obj = parse_object(line)?;
    let block = parse_block(obj.get("block").ok_or("missing field `block`")?)?;
    let pool: Address = field_str(&obj, "pool")?.parse().map_err(|e: Error| e.to_string())?;
    let platform: Platform = field_str(&obj, "platform")?
        .parse()
        .map_err(|e: Error| e.to_string())?;
    Ok(TransferRecord { block, pool, platform })
}

/// Parses line-delimited JSON transfers, keeping only blocks inside `range`,
/// sorted stably by block.
pub fn parse_transfers<R: BufRead>(
    input: R,
    range: BlockRange,
    options: ParseOptions,
) -> Result<Parsed<Vec<TransferRecord>>> {
    let mut records = Vec::new();
    let mut budget = ErrorBudget {
        errors: Vec::new(),
        max: options.max_errors,
    };
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                budget.push(lineno, format!("unreadable line: {e}"))?;
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match parse_transfer_line(&line) {
            Ok(rec) if range.contains(rec.block) => records.push(rec),
            Ok(_) => {}
            Err(msg) => budget.push(lineno, msg)?,
        }
    }
    records.sort_by_key(|r| r.block);
    Ok(Parsed {
        value: records,
        errors: budget.errors,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, Default)]
pub struct Resolved {
    pub events: Vec<EdgeEvent>,
    /// Records whose pool is not in the registry.
    pub unknown_pools: usize,
}

/// Maps each transfer onto its pool's token pair.
pub fn resolve_edge_events(records: &[TransferRecord], registry: &PoolRegistry) -> Resolved {
    let mut out = Resolved {
        events: Vec::with_capacity(records.len()),
        unknown_pools: 0,
    };
    for rec in records {
        let event = registry
            .get(&rec.pool)
            .and_then(|pool| EdgeEvent::new(rec.block, pool.token0.clone(), pool.token1.clone(), rec.platform.clone()));
        match event {
            Some(ev) => out.events.push(ev),
            None => out.unknown_pools += 1,
        }
    }
    out
}

#[derive(Serialize)]
struct PoolLineOut<'a> {
    pool: Address,
    token0: Address,
    token1: Address,
    platform: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    symbol0: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    symbol1: Option<&'a str>,
}

#[derive(Serialize)]
struct TransferLineOut<'a> {
    block: BlockHeight,
    pool: Address,
    platform: &'a str,
}

pub fn write_pool_registry<W: Write>(mut out: W, registry: &PoolRegistry) -> std::io::Result<()> {
    for pool in registry.iter() {
        let line = PoolLineOut {
            pool: pool.address,
            token0: pool.token0.address,
            token1: pool.token1.address,
            platform: pool.platform.name(),
            symbol0: pool.token0.symbol.as_deref(),
            symbol1: pool.token1.symbol.as_deref(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_transfers<W: Write>(mut out: W, records: &[TransferRecord]) -> std::io::Result<()> {
    for rec in records {
        let line = TransferLineOut {
            block: rec.block,
            pool: rec.pool,
            platform: rec.platform.name(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("gz"))
}

/// Opens a fixture for reading, transparently decompressing `.gz` files.
pub fn open_input(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if is_gzip(path) {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

/// Creates an output file, gzip-compressing when the path ends in `.gz`.
pub fn create_output(path: &Path) -> Result<Box<dyn Write>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    if is_gzip(path) {
        Ok(Box::new(BufWriter::new(GzEncoder::new(file, Compression::default()))))
    } else {
        Ok(Box::new(BufWriter::new(file)))
    }
}

pub fn read_pool_registry(path: &Path, options: ParseOptions) -> Result<Parsed<PoolRegistry>> {
    parse_pool_registry(open_input(path)?, options)
}

pub fn read_transfers(path: &Path, range: BlockRange, options: ParseOptions) -> Result<Parsed<Vec<TransferRecord>>> {
    parse_transfers(open_input(path)?, range, options)
}
