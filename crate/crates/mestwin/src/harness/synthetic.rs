use serde::Serialize;

use crate::orchestrator::{CallOutcome, Orchestrator, RejectReason, Rejection, Session, ToolCall};

/// What the recursive agent did for one question.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionStats {
    pub rounds_attempted: u32,
    pub rounds_executed: u32,
    pub calls_executed: u32,
    pub calls_rejected: u32,
    pub stopped_by_circuit: bool,
}

/// A synthetic agent that decomposes every answer into further tool calls,
/// indefinitely, up to `max_depth` rounds. Against an uncapped session it
/// keeps digging; against a capped one the circuit breaker cuts it off.
pub struct RecursiveAgent {
    pub fanout: u32,
    pub max_depth: u32,
}

impl RecursiveAgent {
    pub fn new(fanout: u32, max_depth: u32) -> Self {
        RecursiveAgent { fanout, max_depth }
    }

    pub fn run_question(
        &self,
        orch: &Orchestrator,
        session: &mut Session,
        question_id: &str,
    ) -> DecompositionStats {
        let stations: Vec<String> = orch
            .snapshot()
            .station_order()
            .to_vec();
        let version = orch.snapshot().version_id().to_string();
        let mut stats = DecompositionStats {
            rounds_attempted: 0,
            rounds_executed: 0,
            calls_executed: 0,
            calls_rejected: 0,
            stopped_by_circuit: false,
        };
        let mut cursor = 0usize;
        for depth in 0..self.max_depth {
            stats.rounds_attempted += 1;
            let calls: Vec<ToolCall> = (0..self.fanout)
                .map(|i| {
                    let station = stations[cursor % stations.len()].clone();
                    cursor += 1;
                    ToolCall {
                        call_id: format!("{question_id}-d{depth}-c{i}"),
                        question_id: question_id.to_string(),
                        tool_name: if i % 2 == 0 { "cycle_time" } else { "first_pass_yield" }.into(),
                        args: [("station_id".to_string(), station)].into_iter().collect(),
                        snapshot_version: version.clone(),
                    }
                })
                .collect();
            let outcomes = orch.execute_round(session, question_id, &calls);
            let mut all_rejected_by_circuit = true;
            for outcome in outcomes {
                match outcome {
                    CallOutcome::Result(_) => {
                        stats.calls_executed += 1;
                        all_rejected_by_circuit = false;
                    }
                    CallOutcome::Rejected(Rejection { reason: RejectReason::CircuitOpen { .. }, .. }) => {
                        stats.calls_rejected += 1;
                    }
                    CallOutcome::Rejected(_) | CallOutcome::Failed(_) => {
                        stats.calls_rejected += 1;
                        all_rejected_by_circuit = false;
                    }
                }
            }
            if all_rejected_by_circuit {
                // The breaker fired: a real agent sees rejections and stops.
                stats.stopped_by_circuit = true;
                break;
            }
            stats.rounds_executed += 1;
        }
        stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::builtin_snapshot;
    use crate::tools::ConstraintMode;
    use crate::warehouse::{build_schema, refresh_star, SqliteStore};
    use std::sync::Arc;

    fn orchestrator() -> Orchestrator {
        let snap = builtin_snapshot("aerospace").unwrap();
        let store = SqliteStore::in_memory().unwrap();
        build_schema(&snap, &store).unwrap();
        refresh_star(&store).unwrap();
        Orchestrator::new(snap, Arc::new(store), ConstraintMode::Constrained)
    }

    #[test]
    fn capped_session_bounds_rounds_and_calls() {
        let orch = orchestrator();
        let mut session = orch.open_session(3);
        let agent = RecursiveAgent::new(2, 10);
        let stats = agent.run_question(&orch, &mut session, "q1");
        assert!(stats.stopped_by_circuit);
        assert_eq!(stats.rounds_executed, 3);
        assert!(stats.calls_executed <= 3 * 2);
        assert_eq!(session.rounds_used("q1"), 3);
    }

    #[test]
    fn uncapped_session_lets_the_agent_run_away() {
        let orch = orchestrator();
        let mut session = orch.open_session(u32::MAX);
        let agent = RecursiveAgent::new(2, 10);
        let stats = agent.run_question(&orch, &mut session, "q1");
        assert!(!stats.stopped_by_circuit);
        assert!(stats.calls_executed > 10, "{}", stats.calls_executed);
        assert_eq!(stats.rounds_executed, 10);
    }
}
