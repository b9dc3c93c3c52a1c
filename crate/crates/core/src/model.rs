//! Domain types shared by every stage of the pipeline: token identifiers,
//! platform tags, block ranges and the equal-width block segmentation used to
//! build per-slice networks.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A 20-byte account or contract address.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Address(pub [u8; 20]);

impl Address {
    /// Builds an address whose trailing bytes hold `value` big-endian.
    pub fn from_low_u64(value: u64) -> Self {
        let mut bytes = [0u8; 20];
        bytes[12..].copy_from_slice(&value.to_be_bytes());
        Address(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    /// Lowercase `0x`-prefixed hex form.
    pub fn to_hex(&self) -> String {
        format!("0x{}", hex::encode(self.0))
    }
}

impl FromStr for Address {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        let body = trimmed
            .strip_prefix("0x")
            .or_else(|| trimmed.strip_prefix("0X"))
            .unwrap_or(trimmed);
        if body.len() != 40 {
            return Err(Error::InvalidAddress(s.to_string()));
        }
        let mut bytes = [0u8; 20];
        hex::decode_to_slice(body, &mut bytes).map_err(|_| Error::InvalidAddress(s.to_string()))?;
        Ok(Address(bytes))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({})", self.to_hex())
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A token node. Identity is the address alone; the symbol is display metadata
/// because symbols collide on-chain.
#[derive(Clone, Serialize, Deserialize)]
pub struct TokenId {
    pub address: Address,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
}

impl TokenId {
    pub fn new(address: Address) -> Self {
        TokenId { address, symbol: None }
    }

    pub fn with_symbol(address: Address, symbol: impl Into<String>) -> Self {
        TokenId {
            address,
            symbol: Some(symbol.into()),
        }
    }

    /// Symbol if known, otherwise the hex address.
    pub fn label(&self) -> String {
        self.symbol.clone().unwrap_or_else(|| self.address.to_hex())
    }
}

impl FromStr for TokenId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(TokenId::new(s.parse()?))
    }
}

impl PartialEq for TokenId {
    fn eq(&self, other: &Self) -> bool {
        self.address == other.address
    }
}

impl Eq for TokenId {}

impl Hash for TokenId {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.address.hash(state);
    }
}

impl PartialOrd for TokenId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TokenId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.address.cmp(&other.address)
    }
}

impl fmt::Debug for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.symbol {
            Some(sym) => write!(f, "{}({})", sym, self.address.to_hex()),
            None => write!(f, "{}", self.address.to_hex()),
        }
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.address.to_hex())
    }
}

/// Exchange a pool, record or graph belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Platform {
    Uniswap,
    Sushiswap,
    Other(String),
}

impl Platform {
    pub fn name(&self) -> &str {
        match self {
            Platform::Uniswap => "uniswap",
            Platform::Sushiswap => "sushiswap",
            Platform::Other(name) => name,
        }
    }
}

impl FromStr for Platform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let name = s.trim().to_ascii_lowercase();
        match name.as_str() {
            "" => Err(Error::InvalidPlatform(s.to_string())),
            "uniswap" | "uniswapv2" | "uniswap-v2" => Ok(Platform::Uniswap),
            "sushiswap" | "sushi" => Ok(Platform::Sushiswap),
            _ if name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') => {
                Ok(Platform::Other(name))
            }
            _ => Err(Error::InvalidPlatform(s.to_string())),
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Platform {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Platform {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub type BlockHeight = u64;

/// Inclusive block range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockRange {
    pub start: BlockHeight,
    pub end: BlockHeight,
}

impl BlockRange {
    pub fn new(start: BlockHeight, end: BlockHeight) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidRange { start, end });
        }
        Ok(BlockRange { start, end })
    }

    /// Number of blocks covered, `end - start + 1`.
    pub fn len(&self) -> u64 {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, block: BlockHeight) -> bool {
        self.start <= block && block <= self.end
    }
}

impl FromStr for BlockRange {
    type Err = Error;

    /// Parses `start:end`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidRangeSyntax(s.to_string()))?;
        let parse = |v: &str| {
            v.trim()
                .replace(['_', ','], "")
                .parse::<u64>()
                .map_err(|_| Error::InvalidRangeSyntax(s.to_string()))
        };
        BlockRange::new(parse(a)?, parse(b)?)
    }
}

impl fmt::Display for BlockRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

/// Slice index: 0 is the whole range, `1..=n` the equal-width segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SliceIndex(pub u32);

impl SliceIndex {
    pub const WHOLE: SliceIndex = SliceIndex(0);

    pub fn is_whole(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for SliceIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// Partition of a block range into `n` half-open segments
/// `[boundaries[i-1], boundaries[i])`. Widths come from integer division and
/// the final segment absorbs the remainder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSegmentation {
    range: BlockRange,
    boundaries: Vec<BlockHeight>,
}

impl TimeSegmentation {
    pub fn range(&self) -> BlockRange {
        self.range
    }

    pub fn n_segments(&self) -> u32 {
        (self.boundaries.len() - 1) as u32
    }

    pub fn boundaries(&self) -> &[BlockHeight] {
        &self.boundaries
    }

    /// Half-open block interval `[lo, hi)` of a slice; slice 0 spans the whole range.
    pub fn bounds(&self, slice: SliceIndex) -> Result<(BlockHeight, BlockHeight)> {
        let n = self.n_segments();
        if slice.0 > n {
            return Err(Error::SliceOutOfRange { slice: slice.0, n_segments: n });
        }
        if slice.is_whole() {
            return Ok((self.range.start, self.range.end + 1));
        }
        let i = slice.0 as usize;
        Ok((self.boundaries[i - 1], self.boundaries[i]))
    }

    pub fn contains(&self, slice: SliceIndex, block: BlockHeight) -> bool {
        match self.bounds(slice) {
            Ok((lo, hi)) => lo <= block && block < hi,
            Err(_) => false,
        }
    }

    /// Validates and rebuilds a segmentation from stored boundaries.
    pub fn from_boundaries(range: BlockRange, boundaries: Vec<BlockHeight>) -> Result<Self> {
        let ok = boundaries.len() >= 2
            && boundaries[0] == range.start
            && *boundaries.last().unwrap() == range.end + 1
            && boundaries.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(Error::InvalidSegmentation(
                "boundaries must strictly increase from range start to range end + 1".into(),
            ));
        }
        Ok(TimeSegmentation { range, boundaries })
    }
}

/// Splits `range` into `n` equal segments; the last one takes the remainder.
pub fn segment_blocks(range: BlockRange, n: u32) -> Result<TimeSegmentation> {
    if range.start > range.end {
        return Err(Error::InvalidRange {
            start: range.start,
            end: range.end,
        });
    }
    if n == 0 || u64::from(n) > range.len() {
        return Err(Error::InvalidSegmentation(format!(
            "cannot split {} blocks into {} segments",
            range.len(),
            n
        )));
    }
    let width = range.len() / u64::from(n);
    let mut boundaries: Vec<BlockHeight> = (0..n as u64).map(|i| range.start + i * width).collect();
    boundaries.push(range.end + 1);
    Ok(TimeSegmentation { range, boundaries })
}

/// Slice (1-based) that contains `block`.
pub fn slice_of_block(seg: &TimeSegmentation, block: BlockHeight) -> Result<SliceIndex> {
    if !seg.range.contains(block) {
        return Err(Error::BlockOutOfRange {
            block,
            start: seg.range.start,
            end: seg.range.end,
        });
    }
    // partition_point gives the count of boundaries <= block, which is the slice number.
    let idx = seg.boundaries.partition_point(|&b| b <= block);
    Ok(SliceIndex(idx as u32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_division() {
        let seg = segment_blocks(BlockRange::new(0, 99).unwrap(), 10).unwrap();
        assert_eq!(seg.boundaries(), &[0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100]);
    }

    #[test]
    fn study_range_widths() {
        let range = BlockRange::new(10_060_850, 15_076_596).unwrap();
        let seg = segment_blocks(range, 100).unwrap();
        let b = seg.boundaries();
        // 5,015,747 blocks / 100 = 50,157 rem 47
        assert_eq!(range.len(), 5_015_747);
        for i in 1..100 {
            assert_eq!(b[i] - b[i - 1], 50_157);
        }
        assert_eq!(b[100] - b[99], 50_157 + 47);
        assert_eq!(b[100], 15_076_597);
        assert_eq!(slice_of_block(&seg, 10_060_850).unwrap(), SliceIndex(1));
        assert_eq!(slice_of_block(&seg, 15_076_596).unwrap(), SliceIndex(100));
    }

    #[test]
    fn degenerate_range() {
        let seg = segment_blocks(BlockRange::new(5, 5).unwrap(), 1).unwrap();
        assert_eq!(seg.boundaries(), &[5, 6]);
        assert_eq!(slice_of_block(&seg, 5).unwrap(), SliceIndex(1));
    }

    #[test]
    fn first_and_last_block() {
        let seg = segment_blocks(BlockRange::new(0, 99).unwrap(), 10).unwrap();
        assert_eq!(slice_of_block(&seg, 0).unwrap(), SliceIndex(1));
        assert_eq!(slice_of_block(&seg, 99).unwrap(), SliceIndex(10));
        assert_eq!(slice_of_block(&seg, 10).unwrap(), SliceIndex(2));
        assert!(matches!(slice_of_block(&seg, 100), Err(Error::BlockOutOfRange { .. })));
    }

    #[test]
    fn too_many_segments() {
        let r = BlockRange::new(0, 4).unwrap();
        assert!(matches!(segment_blocks(r, 6), Err(Error::InvalidSegmentation(_))));
        assert!(matches!(segment_blocks(r, 0), Err(Error::InvalidSegmentation(_))));
        assert!(segment_blocks(r, 5).is_ok());
    }

    #[test]
    fn range_rejects_inverted() {
        assert!(BlockRange::new(3, 2).is_err());
        assert_eq!("10:20".parse::<BlockRange>().unwrap(), BlockRange::new(10, 20).unwrap());
        assert_eq!(
            "10,060,850:15_076_596".parse::<BlockRange>().unwrap(),
            BlockRange::new(10_060_850, 15_076_596).unwrap()
        );
        assert!("10-20".parse::<BlockRange>().is_err());
    }

    #[test]
    fn token_identity_ignores_case_and_symbol() {
        let a: TokenId = "0xC02aaA39b223FE8D0A0e5C4F27eAD9083C756Cc2".parse().unwrap();
        let mut b: TokenId = "c02aaa39b223fe8d0a0e5c4f27ead9083c756cc2".parse().unwrap();
        b.symbol = Some("WETH".into());
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "0xc02aaa39b223fe8d0a0e5c4f27ead9083c756cc2");
        assert!("0x1234".parse::<TokenId>().is_err());
        assert!("0xzz2aaa39b223fe8d0a0e5c4f27ead9083c756cc2".parse::<TokenId>().is_err());
    }

    #[test]
    fn platform_names() {
        assert_eq!("UniSwap".parse::<Platform>().unwrap(), Platform::Uniswap);
        assert_eq!("sushiswap".parse::<Platform>().unwrap(), Platform::Sushiswap);
        assert_eq!("pancake".parse::<Platform>().unwrap(), Platform::Other("pancake".into()));
        assert!("".parse::<Platform>().is_err());
        assert!("a b".parse::<Platform>().is_err());
    }

    proptest! {
        #[test]
        fn segmentation_partitions_range(start in 0u64..1_000, len in 1u64..400, n in 1u32..50) {
            prop_assume!(u64::from(n) <= len);
            let range = BlockRange::new(start, start + len - 1).unwrap();
            let seg = segment_blocks(range, n).unwrap();
            let widths: u64 = seg.boundaries().windows(2).map(|w| w[1] - w[0]).sum();
            prop_assert_eq!(widths, range.len());
            for block in range.start..=range.end {
                let s = slice_of_block(&seg, block).unwrap();
                prop_assert!(s.0 >= 1 && s.0 <= n);
                let hits = (1..=n).filter(|&i| seg.contains(SliceIndex(i), block)).count();
                prop_assert_eq!(hits, 1);
                prop_assert!(seg.contains(SliceIndex(s.0), block));
            }
        }
    }
}
