use std::io::Write;

use dexnet::ingest::rpc::mock::{Fault, MockFactory};
use dexnet::ingest::rpc::{fetch_pool_registry, RpcOptions};
use dexnet::ingest::{
    parse_pool_registry, parse_transfers, read_transfers, resolve_edge_events, write_transfers, ParseOptions, Pool,
    PoolRegistry, TransferRecord,
};
use dexnet::{Address, BlockRange, Error, Platform, TokenId};
use proptest::prelude::*;

fn addr(i: u64) -> Address {
    Address::from_low_u64(i)
}

#[test]
fn mock_factory_gives_exact_registry() {
    let factory = MockFactory {
        factory: addr(0xfac),
        pools: vec![(addr(0x100), addr(1), addr(2)), (addr(0x101), addr(2), addr(3))],
        fault: Fault::None,
    };
    let pools = factory.pools.clone();
    let server = factory.serve();
    let registry = fetch_pool_registry(&server.url, addr(0xfac), Platform::Sushiswap, RpcOptions::default()).unwrap();
    let mut expected = PoolRegistry::new();
    for &(pool, a, b) in &pools {
        expected
            .insert(Pool {
                address: pool,
                token0: TokenId::new(a),
                token1: TokenId::new(b),
                platform: Platform::Sushiswap,
            })
            .unwrap();
    }
    assert_eq!(registry, expected);
}

#[test]
fn malformed_lines_reported_per_line() {
    let fixture = "\
{\"pool\":\"0x0000000000000000000000000000000000000100\",\"token0\":\"0x0000000000000000000000000000000000000001\",\"token1\":\"0x0000000000000000000000000000000000000002\",\"platform\":\"uniswap\"}
not json
{\"pool\":\"0x0000000000000000000000000000000000000101\",\"token0\":\"0xzz\",\"token1\":\"0x0000000000000000000000000000000000000002\",\"platform\":\"uniswap\"}

{\"pool\":\"0x0000000000000000000000000000000000000102\",\"token0\":\"0x0000000000000000000000000000000000000001\",\"token1\":\"0x0000000000000000000000000000000000000003\",\"platform\":\"pancake\"}
";
    let parsed = parse_pool_registry(fixture.as_bytes(), ParseOptions::default()).unwrap();
    assert_eq!(parsed.value.len(), 2);
    let lines: Vec<usize> = parsed.errors.iter().map(|e| e.line).collect();
    assert_eq!(lines, [2, 3]);

    let strict = parse_pool_registry(fixture.as_bytes(), ParseOptions { max_errors: 1 });
    assert!(matches!(strict, Err(Error::TooManyParseErrors { count: 2, first_line: 2, .. })));

    let transfers = "{\"block\":5,\"pool\":\"0x0000000000000000000000000000000000000100\",\"platform\":\"uniswap\"}\n\
                     {\"block\":\"x\",\"pool\":\"0x0000000000000000000000000000000000000100\",\"platform\":\"uniswap\"}\n\
                     {\"block\":\"3\",\"pool\":\"0x0000000000000000000000000000000000000100\",\"platform\":\"uniswap\"}\n\
                     {\"block\":99,\"pool\":\"0x0000000000000000000000000000000000000100\",\"platform\":\"uniswap\"}\n";
    let parsed = parse_transfers(transfers.as_bytes(), BlockRange::new(0, 10).unwrap(), ParseOptions::default()).unwrap();
    assert_eq!(parsed.value.iter().map(|r| r.block).collect::<Vec<_>>(), [3, 5]);
    assert_eq!(parsed.errors.len(), 1);
    assert_eq!(parsed.errors[0].line, 2);
}

#[test]
fn gzip_transfers_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl.gz");
    let records: Vec<TransferRecord> = (0..50)
        .map(|b| TransferRecord {
            block: b,
            pool: addr(0x100 + b % 3),
            platform: Platform::Uniswap,
        })
        .collect();
    let mut out = dexnet::ingest::create_output(&path).unwrap();
    write_transfers(&mut out, &records).unwrap();
    out.flush().unwrap();
    drop(out);
    let back = read_transfers(&path, BlockRange::new(0, 49).unwrap(), ParseOptions::default()).unwrap();
    assert_eq!(back.value, records);
}

fn registry(n: u64) -> PoolRegistry {
    let mut reg = PoolRegistry::new();
    for i in 0..n {
        reg.insert(Pool {
            address: addr(0x1000 + i),
            token0: TokenId::new(addr(i + 1)),
            token1: TokenId::new(addr(i + 2)),
            platform: Platform::Uniswap,
        })
        .unwrap();
    }
    reg
}

proptest! {
    #[test]
    fn events_plus_skips_equal_records(picks in prop::collection::vec((0u64..40, 0u64..1000), 0..300)) {
        let reg = registry(20);
        let mut records: Vec<TransferRecord> = picks
            .iter()
            .map(|&(p, b)| TransferRecord { block: b, pool: addr(0x1000 + p), platform: Platform::Uniswap })
            .collect();
        records.sort_by_key(|r| r.block);
        let resolved = resolve_edge_events(&records, &reg);
        prop_assert_eq!(resolved.events.len() + resolved.unknown_pools, records.len());
        prop_assert!(resolved.events.windows(2).all(|w| w[0].block <= w[1].block));
    }
}
