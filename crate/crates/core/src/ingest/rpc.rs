//! Pool enumeration through a factory contract over Ethereum JSON-RPC.
//!
//! `allPairsLength()` gives the pool count, `allPairs(i)` each pool address,
//! and every pool is then asked for `token0()` / `token1()` since the factory
//! only returns addresses. Calls go out as JSON-RPC batches of `eth_call`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::ingest::{Pool, PoolRegistry};
use crate::model::{Address, Platform, TokenId};

pub const ALL_PAIRS_LENGTH: [u8; 4] = [0x57, 0x4f, 0x2b, 0xa3];
pub const ALL_PAIRS: [u8; 4] = [0x1e, 0x3d, 0xd1, 0x8b];
pub const TOKEN0: [u8; 4] = [0x0d, 0xfe, 0x16, 0x81];
pub const TOKEN1: [u8; 4] = [0xd2, 0x12, 0x20, 0xa7];

#[derive(Debug, Clone)]
pub struct RpcOptions {
    /// Concurrent batch requests in flight.
    pub parallelism: usize,
    /// `eth_call`s per JSON-RPC batch.
    pub batch_size: usize,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
    pub timeout: Duration,
}

impl Default for RpcOptions {
    fn default() -> Self {
        RpcOptions {
            parallelism: 8,
            batch_size: 100,
            max_retries: 4,
            initial_backoff: Duration::from_millis(250),
            max_backoff: Duration::from_secs(8),
            timeout: Duration::from_secs(30),
        }
    }
}

/// One `eth_call` to issue.
#[derive(Debug, Clone)]
pub struct EthCall {
    /// Human-readable name used in errors, e.g. `allPairs(7)`.
    pub label: String,
    pub to: Address,
    pub data: Vec<u8>,
}

impl EthCall {
    pub fn new(label: impl Into<String>, to: Address, selector: [u8; 4], args: &[u64]) -> Self {
        let mut data = selector.to_vec();
        for &arg in args {
            data.extend_from_slice(&encode_uint(arg));
        }
        EthCall {
            label: label.into(),
            to,
            data,
        }
    }
}

fn encode_uint(value: u64) -> [u8; 32] {
    let mut word = [0u8; 32];
    word[24..].copy_from_slice(&value.to_be_bytes());
    word
}

/// Decodes a `uint256` return value that must fit in a `u64`.
pub fn decode_uint(call: &str, data: &[u8]) -> Result<u64> {
    if data.len() < 32 {
        return Err(Error::Decode {
            call: call.to_string(),
            reason: format!("expected a 32-byte word, got {} bytes", data.len()),
        });
    }
    if data[..24].iter().any(|&b| b != 0) {
        return Err(Error::Decode {
            call: call.to_string(),
            reason: "value does not fit in 64 bits".to_string(),
        });
    }
    let mut buf = [0u8; 8];
    buf.copy_from_slice(&data[24..32]);
    Ok(u64::from_be_bytes(buf))
}

/// Decodes an ABI-encoded `address` return value.
pub fn decode_address(call: &str, data: &[u8]) -> Result<Address> {
    if data.len() < 32 {
        return Err(Error::Decode {
            call: call.to_string(),
            reason: format!("expected a 32-byte word, got {} bytes", data.len()),
        });
    }
    if data[..12].iter().any(|&b| b != 0) {
        return Err(Error::Decode {
            call: call.to_string(),
            reason: "address word has non-zero padding".to_string(),
        });
    }
    let mut bytes = [0u8; 20];
    bytes.copy_from_slice(&data[12..32]);
    Ok(Address(bytes))
}

fn decode_hex_result(call: &str, value: &Value) -> Result<Vec<u8>> {
    let text = value.as_str().ok_or_else(|| Error::Decode {
        call: call.to_string(),
        reason: format!("result is not a hex string: {value}"),
    })?;
    let body = text.strip_prefix("0x").unwrap_or(text);
    hex::decode(body).map_err(|e| Error::Decode {
        call: call.to_string(),
        reason: format!("invalid hex: {e}"),
    })
}

/// Blocking JSON-RPC client for batched `eth_call`s.
pub struct RpcClient {
    agent: ureq::Agent,
    endpoint: String,
    options: RpcOptions,
}

type BatchResult = Result<Vec<Vec<u8>>>;

impl RpcClient {
    pub fn new(endpoint: impl Into<String>, options: RpcOptions) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(options.timeout))
            .build();
        RpcClient {
            agent: config.into(),
            endpoint: endpoint.into(),
            options,
        }
    }

    pub fn options(&self) -> &RpcOptions {
        &self.options
    }

    fn post_with_retry(&self, what: &str, body: &Value) -> Result<Value> {
        let mut backoff = self.options.initial_backoff;
        let mut attempt = 0;
        loop {
            let outcome = self
                .agent
                .post(&self.endpoint)
                .send_json(body)
                .and_then(|mut resp| resp.body_mut().read_json::<Value>());
            match outcome {
                Ok(v) => return Ok(v),
                Err(e) if attempt < self.options.max_retries => {
                    log::warn!("rpc request for {what} failed (attempt {}): {e}; retrying in {backoff:?}", attempt + 1);
                    thread::sleep(backoff);
                    backoff = (backoff * 2).min(self.options.max_backoff);
                    attempt += 1;
                }
                Err(e) => {
                    return Err(Error::Transport {
                        call: what.to_string(),
                        message: format!("{e} after {} attempts", attempt + 1),
                    })
                }
            }
        }
    }

    /// Sends one JSON-RPC batch and returns the raw return data in call order.
    pub fn call_batch(&self, calls: &[EthCall]) -> Result<Vec<Vec<u8>>> {
        if calls.is_empty() {
            return Ok(Vec::new());
        }
        let body: Vec<Value> = calls
            .iter()
            .enumerate()
            .map(|(id, c)| {
                json!({
                    "jsonrpc": "2.0",
                    "id": id,
                    "method": "eth_call",
                    "params": [{"to": c.to.to_hex(), "data": format!("0x{}", hex::encode(&c.data))}, "latest"],
                })
            })
            .collect();
        let what = if calls.len() == 1 {
            calls[0].label.clone()
        } else {
            format!("{} .. {}", calls[0].label, calls[calls.len() - 1].label)
        };
        let response = self.post_with_retry(&what, &Value::Array(body))?;
        // Some nodes answer a single-element batch with a bare object.
        let items = match response {
            Value::Array(items) => items,
            obj @ Value::Object(_) => vec![obj],
            other => {
                return Err(Error::Decode {
                    call: what,
                    reason: format!("unexpected response {other}"),
                })
            }
        };
        let mut out: Vec<Option<Vec<u8>>> = vec![None; calls.len()];
        for item in items {
            let id = item
                .get("id")
                .and_then(Value::as_u64)
                .map(|v| v as usize)
                .filter(|&v| v < calls.len())
                .ok_or_else(|| Error::Decode {
                    call: what.clone(),
                    reason: format!("response without a valid id: {item}"),
                })?;
            let label = &calls[id].label;
            if let Some(err) = item.get("error") {
                return Err(Error::Rpc {
                    call: label.clone(),
                    message: err.to_string(),
                });
            }
            let result = item.get("result").ok_or_else(|| Error::Decode {
                call: label.clone(),
                reason: "missing result".to_string(),
            })?;
            out[id] = Some(decode_hex_result(label, result)?);
        }
        out.into_iter()
            .zip(calls)
            .map(|(slot, call)| {
                slot.ok_or_else(|| Error::Decode {
                    call: call.label.clone(),
                    reason: "no response for this call".to_string(),
                })
            })
            .collect()
    }

    /// Runs many calls in batches with bounded parallelism; results keep call order.
    pub fn call_many(&self, calls: &[EthCall]) -> Result<Vec<Vec<u8>>> {
        let chunks: Vec<&[EthCall]> = calls.chunks(self.options.batch_size.max(1)).collect();
        let results: Mutex<Vec<Option<BatchResult>>> = Mutex::new((0..chunks.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        let workers = self.options.parallelism.clamp(1, chunks.len().max(1));
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, Ordering::Relaxed);
                    if idx >= chunks.len() {
                        break;
                    }
                    let res = self.call_batch(chunks[idx]);
                    let failed = res.is_err();
                    results.lock().unwrap()[idx] = Some(res);
                    if failed {
                        // stop handing out work; remaining slots stay None
                        next.store(chunks.len(), Ordering::Relaxed);
                        break;
                    }
                });
            }
        });
        let mut out = Vec::with_capacity(calls.len());
        for slot in results.into_inner().unwrap() {
            match slot {
                Some(Ok(batch)) => out.extend(batch),
                Some(Err(e)) => return Err(e),
                None => continue,
            }
        }
        if out.len() != calls.len() {
            return Err(Error::Transport {
                call: "eth_call batch".to_string(),
                message: "batch aborted after an earlier failure".to_string(),
            });
        }
        Ok(out)
    }
}

/// Enumerates every pool of a factory contract and its two tokens.
pub fn fetch_pool_registry(
    endpoint: &str,
    factory: Address,
    platform: Platform,
    options: RpcOptions,
) -> Result<PoolRegistry> {
    let client = RpcClient::new(endpoint, options);
    fetch_with_client(&client, factory, platform)
}

pub fn fetch_with_client(client: &RpcClient, factory: Address, platform: Platform) -> Result<PoolRegistry> {
    let length_call = EthCall::new("allPairsLength()", factory, ALL_PAIRS_LENGTH, &[]);
    let raw = client.call_batch(std::slice::from_ref(&length_call))?;
    let length = decode_uint(&length_call.label, &raw[0])?;
    log::info!("factory {factory} reports {length} pairs");

    let pair_calls: Vec<EthCall> = (0..length)
        .map(|i| EthCall::new(format!("allPairs({i})"), factory, ALL_PAIRS, &[i]))
        .collect();
    let pools: Vec<Address> = client
        .call_many(&pair_calls)?
        .iter()
        .zip(&pair_calls)
        .map(|(data, call)| decode_address(&call.label, data))
        .collect::<Result<_>>()?;

    let token_calls: Vec<EthCall> = pools
        .iter()
        .flat_map(|&pool| {
            [
                EthCall::new(format!("token0() on {pool}"), pool, TOKEN0, &[]),
                EthCall::new(format!("token1() on {pool}"), pool, TOKEN1, &[]),
            ]
        })
        .collect();
    let token_data = client.call_many(&token_calls)?;

    let mut registry = PoolRegistry::new();
    for (i, &pool) in pools.iter().enumerate() {
        let t0 = decode_address(&token_calls[2 * i].label, &token_data[2 * i])?;
        let t1 = decode_address(&token_calls[2 * i + 1].label, &token_data[2 * i + 1])?;
        if t0 == t1 {
            log::warn!("pool {pool} pairs {t0} with itself; skipped");
            continue;
        }
        registry.insert(Pool {
            address: pool,
            token0: TokenId::new(t0),
            token1: TokenId::new(t1),
            platform: platform.clone(),
        })?;
    }
    Ok(registry)
}

#[cfg(any(test, feature = "test-support"))]
pub mod mock {
    //! Minimal canned-response JSON-RPC server emulating a pair factory.

    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::{TcpListener, TcpStream};
    use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
    use std::sync::Arc;
    use std::thread;

    use serde_json::{json, Value};

    use super::{ALL_PAIRS, ALL_PAIRS_LENGTH, TOKEN0, TOKEN1};
    use crate::model::Address;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Fault {
        None,
        /// `allPairs` answers with fewer than 32 bytes.
        TruncatedPairs,
        /// The first `n` connections are dropped without a response.
        DropFirst(usize),
    }

    pub struct MockFactory {
        pub factory: Address,
        pub pools: Vec<(Address, Address, Address)>,
        pub fault: Fault,
    }

    pub struct MockServer {
        pub url: String,
        pub requests: Arc<AtomicUsize>,
        stop: Arc<AtomicBool>,
        addr: std::net::SocketAddr,
    }

    impl Drop for MockServer {
        fn drop(&mut self) {
            self.stop.store(true, Ordering::SeqCst);
            let _ = TcpStream::connect(self.addr);
        }
    }

    fn word_uint(v: u64) -> String {
        format!("0x{:064x}", v)
    }

    fn word_addr(a: &Address) -> String {
        format!("0x{}{}", "0".repeat(24), hex::encode(a.0))
    }

    impl MockFactory {
        fn answer(&self, req: &Value) -> Value {
            let id = req.get("id").cloned().unwrap_or(Value::Null);
            let params = &req["params"][0];
            let to: Option<Address> = params["to"].as_str().and_then(|s| s.parse().ok());
            let data = params["data"]
                .as_str()
                .and_then(|s| hex::decode(s.trim_start_matches("0x")).ok())
                .unwrap_or_default();
            let result = match (to, data.get(..4)) {
                (Some(to), Some(sel)) if to == self.factory && sel == ALL_PAIRS_LENGTH => {
                    Some(word_uint(self.pools.len() as u64))
                }
                (Some(to), Some(sel)) if to == self.factory && sel == ALL_PAIRS => {
                    let idx = data.get(4..36).map(|w| {
                        let mut b = [0u8; 8];
                        b.copy_from_slice(&w[24..32]);
                        u64::from_be_bytes(b) as usize
                    });
                    match idx.and_then(|i| self.pools.get(i)) {
                        Some(_) if self.fault == Fault::TruncatedPairs => Some("0x1234".to_string()),
                        Some((pool, _, _)) => Some(word_addr(pool)),
                        None => None,
                    }
                }
                (Some(to), Some(sel)) if sel == TOKEN0 || sel == TOKEN1 => self
                    .pools
                    .iter()
                    .find(|(p, _, _)| *p == to)
                    .map(|(_, t0, t1)| word_addr(if sel == TOKEN0 { t0 } else { t1 })),
                _ => None,
            };
            match result {
                Some(r) => json!({"jsonrpc": "2.0", "id": id, "result": r}),
                None => json!({"jsonrpc": "2.0", "id": id, "error": {"code": -32000, "message": "execution reverted"}}),
            }
        }

        /// Starts serving on an ephemeral localhost port.
        pub fn serve(self) -> MockServer {
            let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock rpc");
            let addr = listener.local_addr().unwrap();
            let stop = Arc::new(AtomicBool::new(false));
            let requests = Arc::new(AtomicUsize::new(0));
            let factory = Arc::new(self);
            {
                let stop = stop.clone();
                let requests = requests.clone();
                thread::spawn(move || {
                    for stream in listener.incoming() {
                        if stop.load(Ordering::SeqCst) {
                            break;
                        }
                        let Ok(stream) = stream else { continue };
                        let n = requests.fetch_add(1, Ordering::SeqCst);
                        if let Fault::DropFirst(k) = factory.fault {
                            if n < k {
                                drop(stream);
                                continue;
                            }
                        }
                        let factory = factory.clone();
                        thread::spawn(move || handle(stream, &factory));
                    }
                });
            }
            MockServer {
                url: format!("http://{addr}"),
                requests,
                stop,
                addr,
            }
        }
    }

    fn handle(stream: TcpStream, factory: &MockFactory) {
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut content_length = 0usize;
        let mut line = String::new();
        loop {
            line.clear();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                return;
            }
            let l = line.trim_end();
            if l.is_empty() {
                break;
            }
            if let Some((k, v)) = l.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    content_length = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0u8; content_length];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        let request: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
        let response = match &request {
            Value::Array(items) => Value::Array(items.iter().map(|r| factory.answer(r)).collect()),
            other => factory.answer(other),
        };
        let payload = response.to_string();
        let mut stream = stream;
        let _ = write!(
            stream,
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
            payload.len(),
            payload
        );
        let _ = stream.flush();
    }
}

#[cfg(test)]
mod tests {
    use super::mock::{Fault, MockFactory};
    use super::*;
    use sha3::{Digest, Keccak256};

    fn selector(signature: &str) -> [u8; 4] {
        let hash = Keccak256::digest(signature.as_bytes());
        [hash[0], hash[1], hash[2], hash[3]]
    }

    #[test]
    fn selectors_match_abi_hashing() {
        assert_eq!(selector("allPairsLength()"), ALL_PAIRS_LENGTH);
        assert_eq!(selector("allPairs(uint256)"), ALL_PAIRS);
        assert_eq!(selector("token0()"), TOKEN0);
        assert_eq!(selector("token1()"), TOKEN1);
    }

    #[test]
    fn decode_words() {
        let mut word = [0u8; 32];
        word[31] = 7;
        assert_eq!(decode_uint("x", &word).unwrap(), 7);
        word[0] = 1;
        assert!(decode_uint("x", &word).is_err());
        assert!(matches!(decode_address("allPairs(0)", &[0u8; 10]), Err(Error::Decode { call, .. }) if call == "allPairs(0)"));
        let mut word = [0u8; 32];
        word[12..].copy_from_slice(&[0xab; 20]);
        assert_eq!(decode_address("x", &word).unwrap(), Address([0xab; 20]));
    }

    fn fast_options() -> RpcOptions {
        RpcOptions {
            initial_backoff: Duration::from_millis(5),
            max_backoff: Duration::from_millis(20),
            timeout: Duration::from_secs(5),
            ..RpcOptions::default()
        }
    }

    fn two_pools() -> Vec<(Address, Address, Address)> {
        vec![
            (Address([0xa1; 20]), Address([0x01; 20]), Address([0x02; 20])),
            (Address([0xa2; 20]), Address([0x01; 20]), Address([0x03; 20])),
        ]
    }

    #[test]
    fn fetch_two_pools() {
        let factory = Address([0xfa; 20]);
        let server = MockFactory { factory, pools: two_pools(), fault: Fault::None }.serve();
        let reg = fetch_pool_registry(&server.url, factory, Platform::Uniswap, fast_options()).unwrap();
        assert_eq!(reg.len(), 2);
        let p = reg.get(&Address([0xa2; 20])).unwrap();
        assert_eq!(p.token0.address, Address([0x01; 20]));
        assert_eq!(p.token1.address, Address([0x03; 20]));
        assert_eq!(p.platform, Platform::Uniswap);
    }

    #[test]
    fn fetch_empty_factory() {
        let factory = Address([0xfa; 20]);
        let server = MockFactory { factory, pools: vec![], fault: Fault::None }.serve();
        let reg = fetch_pool_registry(&server.url, factory, Platform::Sushiswap, fast_options()).unwrap();
        assert!(reg.is_empty());
    }

    #[test]
    fn truncated_call_data_is_decode_error() {
        let factory = Address([0xfa; 20]);
        let server = MockFactory { factory, pools: two_pools(), fault: Fault::TruncatedPairs }.serve();
        let err = fetch_pool_registry(&server.url, factory, Platform::Uniswap, fast_options()).unwrap_err();
        match err {
            Error::Decode { call, .. } => assert!(call.starts_with("allPairs("), "{call}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transport_failures_are_retried() {
        let factory = Address([0xfa; 20]);
        let server = MockFactory { factory, pools: two_pools(), fault: Fault::DropFirst(2) }.serve();
        let reg = fetch_pool_registry(&server.url, factory, Platform::Uniswap, fast_options()).unwrap();
        assert_eq!(reg.len(), 2);
    }

    #[test]
    fn retries_are_bounded() {
        let factory = Address([0xfa; 20]);
        let server = MockFactory { factory, pools: two_pools(), fault: Fault::DropFirst(1000) }.serve();
        let opts = RpcOptions { max_retries: 2, ..fast_options() };
        let err = fetch_pool_registry(&server.url, factory, Platform::Uniswap, opts).unwrap_err();
        assert!(matches!(err, Error::Transport { .. }), "{err:?}");
        assert_eq!(server.requests.load(std::sync::atomic::Ordering::SeqCst), 3);
    }

    #[test]
    fn many_pools_across_batches() {
        let factory = Address([0xfa; 20]);
        let pools: Vec<_> = (0..250u64)
            .map(|i| (Address::from_low_u64(10_000 + i), Address::from_low_u64(1), Address::from_low_u64(100 + i)))
            .collect();
        let server = MockFactory { factory, pools: pools.clone(), fault: Fault::None }.serve();
        let opts = RpcOptions { batch_size: 16, parallelism: 4, ..fast_options() };
        let reg = fetch_pool_registry(&server.url, factory, Platform::Uniswap, opts).unwrap();
        assert_eq!(reg.len(), 250);
        for (p, t0, t1) in pools {
            let got = reg.get(&p).unwrap();
            assert_eq!((got.token0.address, got.token1.address), (t0, t1));
        }
    }
}
