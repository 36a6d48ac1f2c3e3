use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;
/// A call the orchestrator gate rejected; `data` carries the exact payload
/// agents use for self-correction (valid sets, version stamps, budgets).
pub const GATE_REJECTED: i64 = -32001;
/// The tool executed and failed (storage error, arity violation, bad period).
pub const TOOL_FAILED: i64 = -32002;

#[derive(Debug, Clone, Deserialize)]
pub struct Request {
    #[serde(default)]
    pub jsonrpc: String,
    #[serde(default)]
    pub id: Value,
    pub method: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Response {
    pub jsonrpc: &'static str,
    pub id: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<RpcError>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
}

impl Response {
    pub fn ok(id: Value, result: Value) -> Self {
        Response { jsonrpc: "2.0", id, result: Some(result), error: None }
    }

    pub fn err(id: Value, code: i64, message: impl Into<String>, data: Option<Value>) -> Self {
        Response {
            jsonrpc: "2.0",
            id,
            result: None,
            error: Some(RpcError { code, message: message.into(), data }),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("response serializes")
    }
}

#[allow(clippy::result_large_err)] // cold path: one parse failure per bad request line
pub fn parse_line(line: &str) -> Result<Request, Response> {
    let request: Request = serde_json::from_str(line)
        .map_err(|e| Response::err(Value::Null, PARSE_ERROR, format!("parse error: {e}"), None))?;
    if !request.jsonrpc.is_empty() && request.jsonrpc != "2.0" {
        return Err(Response::err(
            request.id.clone(),
            INVALID_REQUEST,
            format!("unsupported jsonrpc version '{}'", request.jsonrpc),
            None,
        ));
    }
    Ok(request)
}

pub fn param_str(params: &Value, key: &str) -> Option<String> {
    params.get(key).and_then(|v| match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    })
}

pub fn invalid_params(id: Value, message: impl Into<String>) -> Response {
    Response::err(id, INVALID_PARAMS, message, None)
}

pub fn method_not_found(id: Value, method: &str) -> Response {
    Response::err(
        id,
        METHOD_NOT_FOUND,
        format!("unknown method '{method}'"),
        Some(json!({
            "known_methods": ["initialize", "session/open", "session/diff", "tools/list", "tools/call"]
        })),
    )
}
