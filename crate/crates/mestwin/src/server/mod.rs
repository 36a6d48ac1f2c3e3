//! Tool discovery and invocation over newline-delimited JSON-RPC 2.0,
//! served on stdio or TCP. This is a deliberately minimal MCP-shaped method
//! set (initialize, tools/list, tools/call, session/open, session/diff),
//! with every tools/call routed through the orchestrator gate; there is no
//! code path to the analytics layer that skips it.

pub mod rpc;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde_json::{json, Value};

use crate::ontology::{builtin_snapshot, diff};
use crate::orchestrator::{CallOutcome, Orchestrator, Session, ToolCall};
use crate::tools::{Constraint, ToolSpec};

use rpc::{param_str, parse_line, Request, Response};

pub const SERVER_NAME: &str = "mestwin";
pub const PROTOCOL_VERSION: &str = "2025-05-01";

/// Shared server state: the orchestrator plus every open session.
pub struct Router {
    orchestrator: Arc<Orchestrator>,
    sessions: Mutex<BTreeMap<String, Session>>,
    call_seq: AtomicU64,
    /// Echo audit lines to stderr (on for real transports, off in-process).
    pub log_audit: bool,
}

impl Router {
    pub fn new(orchestrator: Arc<Orchestrator>) -> Self {
        Router {
            orchestrator,
            sessions: Mutex::new(BTreeMap::new()),
            call_seq: AtomicU64::new(0),
            log_audit: false,
        }
    }

    pub fn orchestrator(&self) -> &Arc<Orchestrator> {
        &self.orchestrator
    }

    /// Handle one request line, producing one response line.
    pub fn handle_line(&self, line: &str) -> String {
        let request = match parse_line(line) {
            Ok(r) => r,
            Err(response) => return response.to_line(),
        };
        self.handle(request).to_line()
    }

    pub fn handle(&self, request: Request) -> Response {
        let id = request.id.clone();
        let response = match request.method.as_str() {
            "initialize" => self.initialize(id.clone()),
            "session/open" => self.session_open(id.clone(), &request.params),
            "session/diff" => self.session_diff(id.clone(), &request.params),
            "tools/list" => self.tools_list(id.clone(), &request.params),
            "tools/call" => self.tools_call(id.clone(), &request.params),
            other => rpc::method_not_found(id.clone(), other),
        };
        if self.log_audit {
            for line in self.orchestrator.audit_lines() {
                eprintln!("{line}");
            }
        }
        response
    }

    fn initialize(&self, id: Value) -> Response {
        Response::ok(
            id,
            json!({
                "protocolVersion": PROTOCOL_VERSION,
                "serverInfo": {"name": SERVER_NAME, "version": env!("CARGO_PKG_VERSION")},
                "capabilities": {"tools": {}},
                "template_id": self.orchestrator.snapshot().template_id(),
                "snapshot_version": self.orchestrator.snapshot().version_id(),
                "mode": self.orchestrator.mode(),
            }),
        )
    }

    fn session_open(&self, id: Value, params: &Value) -> Response {
        let max_rounds = params
            .get("max_rounds")
            .and_then(Value::as_u64)
            .unwrap_or(u64::from(crate::orchestrator::DEFAULT_MAX_ROUNDS)) as u32;
        let mut session = self.orchestrator.open_session(max_rounds);
        if let Some(agents) = params.get("agents").and_then(Value::as_array) {
            for agent in agents.iter().filter_map(Value::as_str) {
                self.orchestrator.join_agent(&mut session, agent);
            }
        }
        let body = json!({
            "session_id": session.session_id,
            "pinned_version": session.pinned_version,
            "max_rounds": session.max_rounds,
            "agents": session.agents,
        });
        self.sessions.lock().expect("sessions lock").insert(session.session_id.clone(), session);
        Response::ok(id, body)
    }

    fn session_diff(&self, id: Value, params: &Value) -> Response {
        let Some(against) = param_str(params, "against") else {
            return rpc::invalid_params(id, "session/diff requires 'against': a template id");
        };
        let other = match builtin_snapshot(&against) {
            Ok(s) => s,
            Err(e) => return rpc::invalid_params(id, e.to_string()),
        };
        let d = diff(self.orchestrator.snapshot(), &other);
        Response::ok(
            id,
            json!({
                "pinned_version": self.orchestrator.snapshot().version_id(),
                "other_version": other.version_id(),
                "added": d.added.len(),
                "removed": d.removed.len(),
                "changed": d.changed.len(),
                "entries": serde_json::to_value(&d).expect("diff serializes"),
            }),
        )
    }

    fn tools_list(&self, id: Value, _params: &Value) -> Response {
        let tools: Vec<Value> = self
            .orchestrator
            .tool_specs()
            .iter()
            .map(wire_tool_schema)
            .collect();
        Response::ok(id, json!({"tools": tools}))
    }

    fn tools_call(&self, id: Value, params: &Value) -> Response {
        let Some(name) = param_str(params, "name") else {
            return rpc::invalid_params(id, "tools/call requires 'name'");
        };
        let mut args = BTreeMap::new();
        if let Some(arguments) = params.get("arguments") {
            let Some(map) = arguments.as_object() else {
                return rpc::invalid_params(id, "'arguments' must be an object");
            };
            for (k, v) in map {
                match param_str(arguments, k) {
                    Some(s) => {
                        args.insert(k.clone(), s);
                    }
                    None => {
                        return rpc::invalid_params(
                            id,
                            format!("argument '{k}' must be a scalar, got {v}"),
                        )
                    }
                }
            }
        }

        let session_id = match param_str(params, "session_id") {
            Some(s) => s,
            None => {
                // Implicit default session shared by session-less callers.
                let mut sessions = self.sessions.lock().expect("sessions lock");
                if !sessions.contains_key("SES-DEFAULT") {
                    let mut session = self.orchestrator.open_session(crate::orchestrator::DEFAULT_MAX_ROUNDS);
                    session.session_id = "SES-DEFAULT".into();
                    sessions.insert("SES-DEFAULT".into(), session);
                }
                "SES-DEFAULT".into()
            }
        };

        let call_n = self.call_seq.fetch_add(1, Ordering::Relaxed) + 1;
        let question_id = param_str(params, "question_id").unwrap_or_else(|| format!("q-{call_n}"));
        let snapshot_version = param_str(params, "snapshot_version")
            .unwrap_or_else(|| self.orchestrator.snapshot().version_id().to_string());
        let call = ToolCall {
            call_id: format!("call-{call_n}"),
            question_id: question_id.clone(),
            tool_name: name,
            args,
            snapshot_version,
        };

        let mut sessions = self.sessions.lock().expect("sessions lock");
        let Some(session) = sessions.get_mut(&session_id) else {
            return rpc::invalid_params(id, format!("unknown session '{session_id}'"));
        };
        let mut outcomes = self.orchestrator.execute_round(session, &question_id, &[call]);
        match outcomes.remove(0) {
            CallOutcome::Result(result) => Response::ok(
                id,
                serde_json::to_value(&*result).expect("annotated result serializes"),
            ),
            CallOutcome::Rejected(rejection) => Response::err(
                id,
                rpc::GATE_REJECTED,
                "call rejected by the parameter gate",
                Some(rejection.wire_payload()),
            ),
            CallOutcome::Failed(e) => {
                let data = match &e {
                    crate::tools::ToolError::Resolution(r) => r.wire_payload(),
                    other => json!({"error": other.to_string()}),
                };
                Response::err(id, rpc::TOOL_FAILED, e.to_string(), Some(data))
            }
        }
    }
}

/// MCP-shaped tool schema. The enum arrays are the ToolSpec constraint
/// vectors verbatim; nothing is re-derived on the way to the wire.
pub fn wire_tool_schema(spec: &ToolSpec) -> Value {
    let mut properties = serde_json::Map::new();
    let mut required = Vec::new();
    for param in &spec.params {
        let mut prop = serde_json::Map::new();
        prop.insert("type".into(), json!("string"));
        prop.insert("description".into(), json!(param.description));
        if let Constraint::Constrained(values) = &param.constraint {
            prop.insert("enum".into(), json!(values));
        }
        if let Some(kind) = param.entity_kind {
            prop.insert("x-entity-kind".into(), json!(kind));
        }
        properties.insert(param.name.clone(), Value::Object(prop));
        if param.required {
            required.push(param.name.clone());
        }
    }
    json!({
        "name": spec.name,
        "description": spec.description,
        "domain_group": spec.domain_group,
        "inputSchema": {
            "type": "object",
            "properties": properties,
            "required": required,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transport {
    Stdio,
    Tcp(u16),
}

/// Serve on stdio: one JSON-RPC request per stdin line, one response per
/// stdout line. Blocks until stdin closes.
pub fn serve_stdio(router: &Router) -> std::io::Result<()> {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    for line in stdin.lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = router.handle_line(&line);
        let mut out = stdout.lock();
        writeln!(out, "{response}")?;
        out.flush()?;
    }
    Ok(())
}

/// A running TCP server; each connection speaks the same line protocol and
/// maps to its own implicit session unless the client opens one explicitly.
pub struct TcpServer {
    listener: TcpListener,
    router: Arc<Router>,
    shutdown: Arc<AtomicBool>,
}

impl TcpServer {
    pub fn bind(router: Arc<Router>, port: u16) -> std::io::Result<Self> {
        let listener = TcpListener::bind(("127.0.0.1", port))?;
        Ok(TcpServer { listener, router, shutdown: Arc::new(AtomicBool::new(false)) })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Handle to request shutdown from another thread.
    pub fn shutdown_handle(&self) -> ShutdownHandle {
        ShutdownHandle {
            flag: Arc::clone(&self.shutdown),
            addr: self.listener.local_addr().ok(),
        }
    }

    /// Accept loop. Returns when the shutdown handle fires.
    pub fn run(self) -> std::io::Result<()> {
        for stream in self.listener.incoming() {
            if self.shutdown.load(Ordering::SeqCst) {
                break;
            }
            let stream = stream?;
            let router = Arc::clone(&self.router);
            std::thread::spawn(move || {
                let _ = serve_connection(&router, stream);
            });
        }
        Ok(())
    }
}

pub struct ShutdownHandle {
    flag: Arc<AtomicBool>,
    addr: Option<SocketAddr>,
}

impl ShutdownHandle {
    pub fn shutdown(&self) {
        self.flag.store(true, Ordering::SeqCst);
        if let Some(addr) = self.addr {
            // Unblock the accept loop.
            let _ = TcpStream::connect(addr);
        }
    }
}

fn serve_connection(router: &Router, stream: TcpStream) -> std::io::Result<()> {
    let reader = BufReader::new(stream.try_clone()?);
    let mut writer = stream;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = router.handle_line(&line);
        writeln!(writer, "{response}")?;
    }
    Ok(())
}
