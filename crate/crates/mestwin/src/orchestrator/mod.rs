//! Runtime enforcement between agents and tools: sessions pinned to one
//! ontology version, a pre-execution parameter gate, a per-question circuit
//! breaker, and a shared tool federation so every agent in a session sees
//! identical schemas.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::Serialize;
use serde_json::json;

use crate::contract::{resolve, AnnotatedResult, ResolutionError};
use crate::ontology::OntologySnapshot;
use crate::tools::{invoke, project_schemas, ConstraintMode, ToolError, ToolSpec};
use crate::warehouse::StoragePort;

pub const DEFAULT_MAX_ROUNDS: u32 = 3;

/// One tool call as submitted by an agent. Calls are stamped with the
/// snapshot version the caller believes is active; a stale stamp is rejected,
/// never silently re-pinned.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolCall {
    pub call_id: String,
    pub question_id: String,
    pub tool_name: String,
    pub args: BTreeMap<String, String>,
    pub snapshot_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RejectReason {
    InvalidParameter(ResolutionError),
    VersionMismatch { call_version: String, pinned_version: String },
    CircuitOpen { question_id: String, max_rounds: u32 },
}

/// A rejected call. The underlying tool is never invoked; the rejection is
/// data returned to the caller for self-correction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub call_id: String,
    pub reason: RejectReason,
}

impl Rejection {
    /// Wire payload handed back to agents.
    pub fn wire_payload(&self) -> serde_json::Value {
        match &self.reason {
            RejectReason::InvalidParameter(e) => e.wire_payload(),
            RejectReason::VersionMismatch { call_version, pinned_version } => json!({
                "error": "version_mismatch",
                "call_version": call_version,
                "pinned_version": pinned_version,
            }),
            RejectReason::CircuitOpen { question_id, max_rounds } => json!({
                "error": "circuit_open",
                "question_id": question_id,
                "max_rounds": max_rounds,
            }),
        }
    }
}

/// Per-call outcome of a round. One bad call never aborts its siblings.
#[derive(Debug)]
pub enum CallOutcome {
    Result(Box<AnnotatedResult>),
    Rejected(Rejection),
    Failed(ToolError),
}

/// A conversation scope: pinned ontology version, member agents, and the
/// per-question round ledger.
#[derive(Debug)]
pub struct Session {
    pub session_id: String,
    pub pinned_version: String,
    pub agents: Vec<String>,
    pub max_rounds: u32,
    rounds: BTreeMap<String, u32>,
}

impl Session {
    pub fn rounds_used(&self, question_id: &str) -> u32 {
        self.rounds.get(question_id).copied().unwrap_or(0)
    }
}

/// Structured audit line for every enforcement decision.
#[derive(Debug, Clone, Serialize)]
pub struct AuditEvent {
    pub event: String,
    pub session_id: String,
    pub detail: serde_json::Value,
}

/// The enforcement layer. Holds the pinned snapshot, the read-only store, and
/// the projected tool federation every agent in every session shares.
pub struct Orchestrator {
    snapshot: OntologySnapshot,
    store: Arc<dyn StoragePort>,
    mode: ConstraintMode,
    specs: Vec<ToolSpec>,
    session_seq: AtomicU64,
    audit: Mutex<Vec<AuditEvent>>,
}

impl Orchestrator {
    pub fn new(snapshot: OntologySnapshot, store: Arc<dyn StoragePort>, mode: ConstraintMode) -> Self {
        let specs = project_schemas(&snapshot, mode);
        Orchestrator {
            snapshot,
            store,
            mode,
            specs,
            session_seq: AtomicU64::new(0),
            audit: Mutex::new(Vec::new()),
        }
    }

    pub fn snapshot(&self) -> &OntologySnapshot {
        &self.snapshot
    }

    pub fn mode(&self) -> ConstraintMode {
        self.mode
    }

    pub fn store(&self) -> &Arc<dyn StoragePort> {
        &self.store
    }

    /// The session-level tool federation: identical for every agent.
    pub fn tool_specs(&self) -> &[ToolSpec] {
        &self.specs
    }

    /// Schemas as one agent sees them. Deliberately independent of the agent
    /// id: federation is a session property.
    pub fn tools_for_agent(&self, _agent_id: &str) -> &[ToolSpec] {
        &self.specs
    }

    pub fn open_session(&self, max_rounds: u32) -> Session {
        let n = self.session_seq.fetch_add(1, Ordering::Relaxed) + 1;
        let session = Session {
            session_id: format!("SES-{n:04}"),
            pinned_version: self.snapshot.version_id().to_string(),
            agents: Vec::new(),
            max_rounds,
            rounds: BTreeMap::new(),
        };
        self.push_audit("session_open", &session.session_id, json!({
            "pinned_version": session.pinned_version,
            "max_rounds": max_rounds,
        }));
        session
    }

    pub fn join_agent(&self, session: &mut Session, agent_id: &str) {
        session.agents.push(agent_id.to_string());
        self.push_audit("agent_join", &session.session_id, json!({"agent_id": agent_id}));
    }

    /// The pre-execution parameter gate. Pass iff the call's version stamp
    /// matches the pinned version, the question still has round budget, the
    /// tool exists, and every entity argument resolves against the pinned
    /// snapshot.
    pub fn gate(&self, session: &Session, call: &ToolCall) -> Result<(), Rejection> {
        let reject = |reason: RejectReason| Rejection { call_id: call.call_id.clone(), reason };

        if call.snapshot_version != session.pinned_version {
            return Err(reject(RejectReason::VersionMismatch {
                call_version: call.snapshot_version.clone(),
                pinned_version: session.pinned_version.clone(),
            }));
        }
        if session.rounds_used(&call.question_id) >= session.max_rounds {
            return Err(reject(RejectReason::CircuitOpen {
                question_id: call.question_id.clone(),
                max_rounds: session.max_rounds,
            }));
        }
        let Some(spec) = self.specs.iter().find(|s| s.name == call.tool_name) else {
            // Unknown tools fail at execution; the gate's contract covers
            // version, budget, and parameter resolution.
            return Ok(());
        };
        for param in &spec.params {
            let Some(kind) = param.entity_kind else { continue };
            let Some(value) = call.args.get(&param.name) else { continue };
            if let Err(e) = resolve(value, kind, &self.snapshot) {
                return Err(reject(RejectReason::InvalidParameter(e)));
            }
        }
        Ok(())
    }

    /// Execute one round: gate every call, run the survivors, increment the
    /// question's round count once. Rejections and per-call failures are
    /// returned in position, alongside sibling successes.
    pub fn execute_round(
        &self,
        session: &mut Session,
        question_id: &str,
        calls: &[ToolCall],
    ) -> Vec<CallOutcome> {
        let mut outcomes = Vec::with_capacity(calls.len());
        for call in calls {
            debug_assert_eq!(call.question_id, question_id);
            match self.gate(session, call) {
                Err(rejection) => {
                    self.push_audit("gate_reject", &session.session_id, json!({
                        "call_id": call.call_id,
                        "tool": call.tool_name,
                        "payload": rejection.wire_payload(),
                    }));
                    outcomes.push(CallOutcome::Rejected(rejection));
                }
                Ok(()) => {
                    self.push_audit("gate_pass", &session.session_id, json!({
                        "call_id": call.call_id,
                        "tool": call.tool_name,
                    }));
                    let spec = self.specs.iter().find(|s| s.name == call.tool_name);
                    let outcome = match spec {
                        None => CallOutcome::Failed(ToolError::UnknownTool(call.tool_name.clone())),
                        Some(spec) => {
                            match invoke(spec, &call.args, &self.snapshot, self.store.as_ref()) {
                                Ok(result) => CallOutcome::Result(Box::new(result)),
                                Err(e) => CallOutcome::Failed(e),
                            }
                        }
                    };
                    outcomes.push(outcome);
                }
            }
        }
        if calls.iter().any(|c| c.snapshot_version == session.pinned_version)
            && session.rounds_used(question_id) < session.max_rounds
        {
            *session.rounds.entry(question_id.to_string()).or_insert(0) += 1;
            self.push_audit("round_advance", &session.session_id, json!({
                "question_id": question_id,
                "rounds_used": session.rounds_used(question_id),
            }));
        }
        outcomes
    }

    fn push_audit(&self, event: &str, session_id: &str, detail: serde_json::Value) {
        self.audit.lock().expect("audit lock").push(AuditEvent {
            event: event.to_string(),
            session_id: session_id.to_string(),
            detail,
        });
    }

    /// Audit trail as JSON lines.
    pub fn audit_lines(&self) -> Vec<String> {
        self.audit
            .lock()
            .expect("audit lock")
            .iter()
            .map(|e| serde_json::to_string(e).expect("audit serializes"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::builtin_snapshot;
    use crate::sim::{run_simulation, DisruptionProfile};
    use crate::warehouse::{build_schema, ingest, refresh_star, SqliteStore};
    use std::sync::OnceLock;

    fn orchestrator() -> &'static Orchestrator {
        static ORCH: OnceLock<Orchestrator> = OnceLock::new();
        ORCH.get_or_init(|| {
            let snap = builtin_snapshot("aerospace").unwrap();
            let store = SqliteStore::in_memory().unwrap();
            build_schema(&snap, &store).unwrap();
            let log = run_simulation(&snap, 42, 10, &DisruptionProfile::stable());
            ingest(&log, &store).unwrap();
            refresh_star(&store).unwrap();
            Orchestrator::new(snap, Arc::new(store), ConstraintMode::Constrained)
        })
    }

    fn call(orch: &Orchestrator, id: &str, q: &str, tool: &str, args: &[(&str, &str)]) -> ToolCall {
        ToolCall {
            call_id: id.to_string(),
            question_id: q.to_string(),
            tool_name: tool.to_string(),
            args: args.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            snapshot_version: orch.snapshot().version_id().to_string(),
        }
    }

    #[test]
    fn default_session_caps_at_three_rounds() {
        let orch = orchestrator();
        let session = orch.open_session(DEFAULT_MAX_ROUNDS);
        assert_eq!(session.max_rounds, 3);
        assert_eq!(session.pinned_version, orch.snapshot().version_id());
    }

    #[test]
    fn fabricated_id_is_rejected_with_the_valid_set() {
        let orch = orchestrator();
        let session = orch.open_session(3);
        let c = call(orch, "c1", "q1", "cycle_time", &[("station_id", "BOND-1")]);
        let rejection = orch.gate(&session, &c).unwrap_err();
        match rejection.reason {
            RejectReason::InvalidParameter(e) => {
                assert_eq!(e.valid_set, vec!["S1", "S2", "S3", "S4", "S5", "S6"]);
            }
            other => panic!("expected InvalidParameter, got {other:?}"),
        }
    }

    #[test]
    fn valid_call_passes_round_one() {
        let orch = orchestrator();
        let session = orch.open_session(3);
        let c = call(orch, "c1", "q1", "cycle_time", &[("station_id", "S4")]);
        assert!(orch.gate(&session, &c).is_ok());
    }

    #[test]
    fn fourth_round_trips_the_circuit() {
        let orch = orchestrator();
        let mut session = orch.open_session(3);
        let c = call(orch, "c", "q1", "cycle_time", &[("station_id", "S4")]);
        for round in 0..3 {
            let outcomes = orch.execute_round(&mut session, "q1", std::slice::from_ref(&c));
            assert!(matches!(outcomes[0], CallOutcome::Result(_)), "round {round}");
        }
        let outcomes = orch.execute_round(&mut session, "q1", std::slice::from_ref(&c));
        match &outcomes[0] {
            CallOutcome::Rejected(r) => {
                assert!(matches!(r.reason, RejectReason::CircuitOpen { .. }));
            }
            other => panic!("expected CircuitOpen, got {other:?}"),
        }
        assert_eq!(session.rounds_used("q1"), 3);
        // A fresh question has a fresh budget.
        let c2 = call(orch, "c", "q2", "cycle_time", &[("station_id", "S4")]);
        let outcomes = orch.execute_round(&mut session, "q2", &[c2]);
        assert!(matches!(outcomes[0], CallOutcome::Result(_)));
    }

    #[test]
    fn zero_round_session_rejects_everything() {
        let orch = orchestrator();
        let session = orch.open_session(0);
        let c = call(orch, "c1", "q1", "cycle_time", &[("station_id", "S4")]);
        let rejection = orch.gate(&session, &c).unwrap_err();
        assert!(matches!(rejection.reason, RejectReason::CircuitOpen { .. }));
    }

    #[test]
    fn stale_version_stamp_is_rejected_not_repinned() {
        let orch = orchestrator();
        let mut session = orch.open_session(3);
        let mut c = call(orch, "c1", "q1", "cycle_time", &[("station_id", "S4")]);
        c.snapshot_version = "deadbeef".into();
        let outcomes = orch.execute_round(&mut session, "q1", &[c]);
        match &outcomes[0] {
            CallOutcome::Rejected(r) => {
                assert!(matches!(r.reason, RejectReason::VersionMismatch { .. }));
                let wire = r.wire_payload();
                assert_eq!(wire["error"], "version_mismatch");
            }
            other => panic!("expected VersionMismatch, got {other:?}"),
        }
        // A round of only stale calls does not consume budget.
        assert_eq!(session.rounds_used("q1"), 0);
    }

    #[test]
    fn rejected_calls_never_reach_storage() {
        let orch = orchestrator();
        let mut session = orch.open_session(3);
        let before = orch.store().op_count();
        let bad = call(orch, "c1", "q1", "ncr_pareto", &[("station_id", "NDT-INSPECT")]);
        let outcomes = orch.execute_round(&mut session, "q1", &[bad]);
        assert!(matches!(outcomes[0], CallOutcome::Rejected(_)));
        assert_eq!(orch.store().op_count(), before);
    }

    #[test]
    fn mixed_batch_returns_result_and_rejection_in_position() {
        let orch = orchestrator();
        let mut session = orch.open_session(3);
        let good = call(orch, "c1", "q1", "cycle_time", &[("station_id", "S4")]);
        let bad = call(orch, "c2", "q1", "cycle_time", &[("station_id", "CNC-BAY-A")]);
        let outcomes = orch.execute_round(&mut session, "q1", &[good, bad]);
        assert!(matches!(outcomes[0], CallOutcome::Result(_)));
        assert!(matches!(outcomes[1], CallOutcome::Rejected(_)));
        assert_eq!(session.rounds_used("q1"), 1);
        match &outcomes[0] {
            CallOutcome::Result(r) => assert_eq!(r.snapshot_version, session.pinned_version),
            _ => unreachable!(),
        }
    }

    #[test]
    fn two_agents_share_an_identical_federation() {
        let orch = orchestrator();
        let mut session = orch.open_session(3);
        orch.join_agent(&mut session, "agent-alpha");
        orch.join_agent(&mut session, "agent-beta");
        let a = serde_json::to_string(orch.tools_for_agent("agent-alpha")).unwrap();
        let b = serde_json::to_string(orch.tools_for_agent("agent-beta")).unwrap();
        assert_eq!(a, b);
        assert_eq!(session.agents, vec!["agent-alpha", "agent-beta"]);
    }

    #[test]
    fn audit_trail_records_every_decision() {
        let snap = builtin_snapshot("warehousing").unwrap();
        let store = SqliteStore::in_memory().unwrap();
        build_schema(&snap, &store).unwrap();
        refresh_star(&store).unwrap();
        let orch = Orchestrator::new(snap, Arc::new(store), ConstraintMode::Constrained);
        let mut session = orch.open_session(3);
        let good = ToolCall {
            call_id: "c1".into(),
            question_id: "q1".into(),
            tool_name: "production_status".into(),
            args: BTreeMap::new(),
            snapshot_version: orch.snapshot().version_id().to_string(),
        };
        orch.execute_round(&mut session, "q1", &[good]);
        let lines = orch.audit_lines();
        assert!(lines.iter().any(|l| l.contains("session_open")));
        assert!(lines.iter().any(|l| l.contains("gate_pass")));
        assert!(lines.iter().any(|l| l.contains("round_advance")));
        for line in &lines {
            serde_json::from_str::<serde_json::Value>(line).expect("audit line is JSON");
        }
    }
}
