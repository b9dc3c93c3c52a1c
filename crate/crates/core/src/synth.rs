//! Seeded synthetic pool registries and transfer streams with a dominant hub
//! token, preferential attachment and heavy-tailed pool popularity.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{Pool, PoolRegistry, TransferRecord};
use crate::model::{Address, BlockRange, Platform, TokenId};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub n_tokens: usize,
    pub n_transfers: usize,
    /// Probability that a new token pairs with the hub.
    pub p_hub: f64,
    /// Partner chosen with probability proportional to `degree^exponent`.
    pub attachment_exponent: f64,
    /// Pool popularity falls off as `rank^-zipf_exponent` in creation order.
    pub zipf_exponent: f64,
    pub range: BlockRange,
    pub platform: Platform,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_tokens: 10_000,
            n_transfers: 100_000,
            p_hub: 0.3,
            attachment_exponent: 1.0,
            zipf_exponent: 1.1,
            range: BlockRange {
                start: 10_060_850,
                end: 15_076_596,
            },
            platform: Platform::Uniswap,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_tokens < 2 {
            return Err(Error::InvalidParameter("synthetic stream needs at least 2 tokens".into()));
        }
        if self.n_transfers == 0 {
            return Err(Error::InvalidParameter("synthetic stream needs at least 1 transfer".into()));
        }
        if !(0.0..=1.0).contains(&self.p_hub) {
            return Err(Error::InvalidParameter(format!("hub fraction {} outside [0, 1]", self.p_hub)));
        }
        if !self.attachment_exponent.is_finite() || self.attachment_exponent < 0.0 {
            return Err(Error::InvalidParameter("attachment exponent must be finite and non-negative".into()));
        }
        if !self.zipf_exponent.is_finite() || self.zipf_exponent < 0.0 {
            return Err(Error::InvalidParameter("zipf exponent must be finite and non-negative".into()));
        }
        if self.range.start > self.range.end {
            return Err(Error::InvalidRange {
                start: self.range.start,
                end: self.range.end,
            });
        }
        Ok(())
    }
}

/// Prefix sums over non-negative weights with point updates and sampling.
struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick { tree: vec![0.0; n + 1] }
    }

    fn add(&mut self, idx: usize, delta: f64) {
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    fn total(&self, upto: usize) -> f64 {
        let mut i = upto;
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i &= i - 1;
        }
        s
    }

    /// Smallest index whose prefix sum exceeds `target`.
    fn find(&self, mut target: f64) -> usize {
        let mut pos = 0;
        let mut step = self.tree.len().next_power_of_two() / 2;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step /= 2;
        }
        pos
    }
}

fn derived_address(kind: &str, seed: u64, index: usize) -> Address {
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    h.update(seed.to_be_bytes());
    h.update((index as u64).to_be_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 20];
    bytes.copy_from_slice(&digest[..20]);
    Address(bytes)
}

/// Generates a registry and a block-sorted transfer stream. Token 0 is the
/// hub (symbol `WETH`); every later token opens exactly one pool.
pub fn generate_stream(params: &SynthParams) -> Result<(PoolRegistry, Vec<TransferRecord>)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.n_tokens;
    let tokens: Vec<TokenId> = (0..n)
        .map(|i| {
            let symbol = if i == 0 { "WETH".to_string() } else { format!("TKN{i}") };
            TokenId::with_symbol(derived_address("token", params.seed, i), symbol)
        })
        .collect();

    let mut degree = vec![0usize; n];
    let mut weights = Fenwick::new(n);
    let attach_weight = |d: usize| (d as f64).powf(params.attachment_exponent);
    let mut pools = Vec::with_capacity(n - 1);
    for i in 1..n {
        let available = weights.total(i);
        let partner = if rng.random::<f64>() < params.p_hub || available <= 0.0 {
            0
        } else {
            let target = rng.random::<f64>() * available;
            weights.find(target).min(i - 1)
        };
        for (node, old) in [(i, degree[i]), (partner, degree[partner])] {
            let new = old + 1;
            let before = if old == 0 { 0.0 } else { attach_weight(old) };
            weights.add(node, attach_weight(new) - before);
            degree[node] = new;
        }
        pools.push(Pool {
            address: derived_address("pool", params.seed, i),
            token0: tokens[partner].clone(),
            token1: tokens[i].clone(),
            platform: params.platform.clone(),
        });
    }

    let popularity: Vec<f64> = (0..pools.len())
        .map(|r| ((r + 1) as f64).powf(-params.zipf_exponent))
        .collect();
    let pick = WeightedIndex::new(&popularity).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut records: Vec<TransferRecord> = (0..params.n_transfers)
        .map(|_| {
            let pool = &pools[pick.sample(&mut rng)];
            TransferRecord {
                block: rng.random_range(params.range.start..=params.range.end),
                pool: pool.address,
                platform: params.platform.clone(),
            }
        })
        .collect();
    records.sort_by_key(|r| r.block);

    let mut registry = PoolRegistry::new();
    for pool in pools {
        registry.insert(pool)?;
    }
    Ok((registry, records))
}
