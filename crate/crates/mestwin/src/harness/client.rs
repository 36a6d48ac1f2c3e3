use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::Duration;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::sim::stream;
use crate::tools::{Constraint, ConstraintMode, ToolSpec};

use super::queries::{fabrication_lexicon, QueryCase};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("client did not produce a tool call: {0}")]
    NoToolCall(String),
    #[error("client transport error: {0}")]
    Transport(String),
    #[error("client response was malformed: {0}")]
    Malformed(String),
}

/// A tool call as planned by a model client.
#[derive(Debug, Clone)]
pub struct PlannedCall {
    pub tool_name: String,
    pub args: BTreeMap<String, String>,
}

/// The model-client port: given a natural-language query and the projected
/// tool schemas, produce a tool call. Any compliant backend can sit behind
/// this; the shipped default is a deterministic mock.
pub trait ModelClient {
    fn name(&self) -> &str;

    fn plan_call(
        &mut self,
        case: &QueryCase,
        specs: &[ToolSpec],
        mode: ConstraintMode,
    ) -> Result<PlannedCall, ClientError>;
}

/// Deterministic stand-in for an LLM. In constrained mode it behaves like
/// any schema-respecting model and emits the enum member matching the ground
/// truth. In unconstrained mode it fabricates a plausible identifier from the
/// configuration's lexicon with probability `fabrication_probability`,
/// otherwise it emits the correct id.
pub struct MockFabricator {
    pub fabrication_probability: f64,
    pub seed: u64,
    rng: ChaCha8Rng,
}

pub const DEFAULT_FABRICATION_PROBABILITY: f64 = 0.43;

/// Default mock RNG seed. At the default probability this seed fabricates
/// 31 of the 72 queries (43%), squarely inside the expected binomial band.
pub const DEFAULT_CLIENT_SEED: u64 = 20250514;

impl MockFabricator {
    pub fn new(fabrication_probability: f64, seed: u64) -> Self {
        MockFabricator {
            fabrication_probability,
            seed,
            rng: stream(seed, "mock-fabricator"),
        }
    }

    /// Replay the mock's draw sequence without invoking anything and count
    /// how many of the given cases would carry a fabricated id. This is the
    /// standalone oracle for end-to-end fabrication counts: same stream, no
    /// tool pipeline involved.
    pub fn standalone_fabrication_count(p: f64, seed: u64, cases: &[QueryCase]) -> usize {
        let mut rng = stream(seed, "mock-fabricator");
        let mut fabricated = 0;
        for case in cases {
            let roll: f64 = rng.random();
            if roll < p {
                let lexicon = fabrication_lexicon(&case.template_id);
                let _idx = rng.random_range(0..lexicon.len());
                fabricated += 1;
            }
        }
        fabricated
    }
}

impl ModelClient for MockFabricator {
    fn name(&self) -> &str {
        "mock"
    }

    fn plan_call(
        &mut self,
        case: &QueryCase,
        specs: &[ToolSpec],
        mode: ConstraintMode,
    ) -> Result<PlannedCall, ClientError> {
        let spec = specs
            .iter()
            .find(|s| s.name == case.tool_name)
            .ok_or_else(|| ClientError::NoToolCall(format!("no schema for {}", case.tool_name)))?;
        let param = spec
            .param(&case.param_name)
            .ok_or_else(|| ClientError::NoToolCall(format!("{} has no {}", case.tool_name, case.param_name)))?;

        let value = match mode {
            ConstraintMode::Constrained => {
                // A compliant client only ever emits enum members.
                if let Constraint::Constrained(values) = &param.constraint {
                    debug_assert!(values.contains(&case.expected_id));
                }
                case.expected_id.clone()
            }
            ConstraintMode::Unconstrained => {
                let roll: f64 = self.rng.random();
                if roll < self.fabrication_probability {
                    let lexicon = fabrication_lexicon(&case.template_id);
                    let idx = self.rng.random_range(0..lexicon.len());
                    lexicon[idx].to_string()
                } else {
                    case.expected_id.clone()
                }
            }
        };
        let mut args = BTreeMap::new();
        args.insert(case.param_name.clone(), value);
        Ok(PlannedCall { tool_name: case.tool_name.clone(), args })
    }
}

/// Chat-completions adapter for a live model over plain HTTP, meant for
/// local inference servers (the usual on-prem deployment shape). Disabled in
/// CI; nothing in the test suite talks to it. TLS endpoints are not
/// supported; front one with a local proxy if needed.
pub struct LiveHttpClient {
    pub endpoint: String,
    pub model: String,
    pub timeout: Duration,
}

impl LiveHttpClient {
    pub fn new(endpoint: &str, model: &str) -> Self {
        LiveHttpClient {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            timeout: Duration::from_secs(120),
        }
    }

    fn post_json(&self, path: &str, body: &serde_json::Value) -> Result<serde_json::Value, ClientError> {
        let (host, port, base) = parse_http_endpoint(&self.endpoint)?;
        let payload = serde_json::to_string(body).expect("body serializes");
        let mut stream = TcpStream::connect((host.as_str(), port))
            .map_err(|e| ClientError::Transport(format!("connect {host}:{port}: {e}")))?;
        stream.set_read_timeout(Some(self.timeout)).ok();
        stream.set_write_timeout(Some(self.timeout)).ok();
        let request = format!(
            "POST {base}{path} HTTP/1.1\r\nHost: {host}\r\nContent-Type: application/json\r\n\
             Content-Length: {}\r\nConnection: close\r\n\r\n{payload}",
            payload.len()
        );
        stream
            .write_all(request.as_bytes())
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let mut raw = Vec::new();
        stream
            .read_to_end(&mut raw)
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let text = String::from_utf8_lossy(&raw);
        let body = text
            .split_once("\r\n\r\n")
            .map(|(_, b)| b)
            .ok_or_else(|| ClientError::Malformed("no HTTP body".into()))?;
        // Tolerate chunked encoding by scanning for the outermost JSON object.
        let start = body.find('{').ok_or_else(|| ClientError::Malformed("no JSON in body".into()))?;
        let end = body.rfind('}').ok_or_else(|| ClientError::Malformed("no JSON in body".into()))?;
        serde_json::from_str(&body[start..=end]).map_err(|e| ClientError::Malformed(e.to_string()))
    }
}

/// Split `http://host:port/base` into parts. Only plain HTTP is accepted.
pub fn parse_http_endpoint(endpoint: &str) -> Result<(String, u16, String), ClientError> {
    let rest = endpoint
        .strip_prefix("http://")
        .ok_or_else(|| ClientError::Transport(format!("only http:// endpoints are supported, got {endpoint}")))?;
    let (authority, base) = match rest.split_once('/') {
        Some((a, b)) => (a, format!("/{b}")),
        None => (rest, String::new()),
    };
    let base = base.trim_end_matches('/').to_string();
    let (host, port) = match authority.split_once(':') {
        Some((h, p)) => (
            h.to_string(),
            p.parse::<u16>().map_err(|_| ClientError::Transport(format!("bad port in {endpoint}")))?,
        ),
        None => (authority.to_string(), 80),
    };
    Ok((host, port, base))
}

impl ModelClient for LiveHttpClient {
    fn name(&self) -> &str {
        "live"
    }

    fn plan_call(
        &mut self,
        case: &QueryCase,
        specs: &[ToolSpec],
        _mode: ConstraintMode,
    ) -> Result<PlannedCall, ClientError> {
        let tools: Vec<serde_json::Value> = specs
            .iter()
            .map(|s| {
                let schema = crate::server::wire_tool_schema(s);
                serde_json::json!({
                    "type": "function",
                    "function": {
                        "name": schema["name"],
                        "description": schema["description"],
                        "parameters": schema["inputSchema"],
                    },
                })
            })
            .collect();
        let body = serde_json::json!({
            "model": self.model,
            "temperature": 0,
            "tools": tools,
            "tool_choice": "auto",
            "messages": [{
                "role": "user",
                "content": format!(
                    "You are a manufacturing analytics assistant. Answer by calling exactly one tool. {}",
                    case.text
                ),
            }],
        });
        let response = self.post_json("/v1/chat/completions", &body)?;
        let call = response["choices"][0]["message"]["tool_calls"][0]
            .as_object()
            .ok_or_else(|| ClientError::NoToolCall(format!("no tool_calls in response for '{}'", case.text)))?;
        let name = call["function"]["name"]
            .as_str()
            .ok_or_else(|| ClientError::Malformed("tool call missing function.name".into()))?
            .to_string();
        let raw_args = call["function"]["arguments"]
            .as_str()
            .ok_or_else(|| ClientError::Malformed("tool call missing function.arguments".into()))?;
        let parsed: serde_json::Value =
            serde_json::from_str(raw_args).map_err(|e| ClientError::Malformed(e.to_string()))?;
        let mut args = BTreeMap::new();
        if let Some(map) = parsed.as_object() {
            for (k, v) in map {
                let value = match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                args.insert(k.clone(), value);
            }
        }
        Ok(PlannedCall { tool_name: name, args })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::queries_for;
    use crate::ontology::builtin_snapshot;
    use crate::tools::project_schemas;

    #[test]
    fn constrained_mock_always_emits_the_expected_enum_member() {
        let snap = builtin_snapshot("aerospace").unwrap();
        let specs = project_schemas(&snap, ConstraintMode::Constrained);
        let mut mock = MockFabricator::new(1.0, 7); // even at p = 1.0
        for case in queries_for(&snap) {
            let call = mock.plan_call(&case, &specs, ConstraintMode::Constrained).unwrap();
            assert_eq!(call.args[&case.param_name], case.expected_id);
        }
    }

    #[test]
    fn unconstrained_mock_is_deterministic_per_seed() {
        let snap = builtin_snapshot("aerospace").unwrap();
        let specs = project_schemas(&snap, ConstraintMode::Unconstrained);
        let cases = queries_for(&snap);
        let run = |seed: u64| -> Vec<String> {
            let mut mock = MockFabricator::new(0.43, seed);
            cases
                .iter()
                .map(|c| mock.plan_call(c, &specs, ConstraintMode::Unconstrained).unwrap().args[&c.param_name].clone())
                .collect()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn zero_probability_means_no_fabrication() {
        let snap = builtin_snapshot("pharma").unwrap();
        let specs = project_schemas(&snap, ConstraintMode::Unconstrained);
        let mut mock = MockFabricator::new(0.0, 3);
        for case in queries_for(&snap) {
            let call = mock.plan_call(&case, &specs, ConstraintMode::Unconstrained).unwrap();
            assert_eq!(call.args[&case.param_name], case.expected_id);
        }
    }

    #[test]
    fn standalone_count_agrees_with_the_live_stream() {
        let snap = builtin_snapshot("aerospace").unwrap();
        let specs = project_schemas(&snap, ConstraintMode::Unconstrained);
        let cases = queries_for(&snap);
        let seed = 99;
        let mut mock = MockFabricator::new(0.43, seed);
        let mut live = 0;
        for case in &cases {
            let call = mock.plan_call(case, &specs, ConstraintMode::Unconstrained).unwrap();
            if call.args[&case.param_name] != case.expected_id {
                live += 1;
            }
        }
        assert_eq!(live, MockFabricator::standalone_fabrication_count(0.43, seed, &cases));
    }

    #[test]
    fn endpoint_parsing() {
        let (host, port, base) = parse_http_endpoint("http://localhost:8000").unwrap();
        assert_eq!((host.as_str(), port, base.as_str()), ("localhost", 8000, ""));
        let (host, port, base) = parse_http_endpoint("http://10.0.0.5:11434/v1api").unwrap();
        assert_eq!((host.as_str(), port, base.as_str()), ("10.0.0.5", 11434, "/v1api"));
        assert!(parse_http_endpoint("https://api.example.com").is_err());
    }
}
