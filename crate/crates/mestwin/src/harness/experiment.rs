use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::ontology::{builtin_snapshot, template_names, LoadError, OntologySnapshot};
use crate::orchestrator::{CallOutcome, Orchestrator, ToolCall};
use crate::sim::{run_simulation, DisruptionProfile};
use crate::tools::{ConstraintMode, DomainGroup, ToolSpec};
use crate::warehouse::{build_schema, ingest, refresh_star, SqliteStore, StorageError};

use super::client::{ClientError, ModelClient};
use super::queries::{queries_for, QueryCase};

/// Mutually exclusive outcome of one query run. Every query lands in exactly
/// one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OutcomeClass {
    /// The call carried an entity argument that does not exist in the snapshot.
    FabricatedId,
    /// The call was valid and executed, but zero rows matched.
    ValidEmptyResult,
    /// The client or the execution failed, or a valid-but-wrong entity
    /// returned data.
    QueryError,
    /// The expected entity was queried and returned rows.
    Correct,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryRecord {
    pub template_id: String,
    pub tool_name: String,
    pub text: String,
    pub expected_id: String,
    pub emitted_value: Option<String>,
    pub outcome: OutcomeClass,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigRow {
    pub template_id: String,
    pub queries: usize,
    pub fabricated: usize,
    pub rate: f64,
    /// Observed fabrications, most frequent first.
    pub top_fabrications: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DomainRow {
    pub domain: DomainGroup,
    pub tools: Vec<String>,
    pub fabricated: usize,
    pub runs: usize,
    pub rate: f64,
}

/// One experimental condition (constrained or unconstrained), aggregated the
/// three ways the study reports: overall, per configuration, per tool domain.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub mode: ConstraintMode,
    pub queries: usize,
    pub fabricated: usize,
    pub valid_empty: usize,
    pub query_error: usize,
    pub correct: usize,
    pub per_config: Vec<ConfigRow>,
    pub per_domain: Vec<DomainRow>,
    pub records: Vec<QueryRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub client: String,
    pub fabrication_probability: Option<f64>,
    pub client_seed: Option<u64>,
    pub sim_seed: u64,
    pub days: u32,
    pub conditions: Vec<ConditionReport>,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Storage(#[from] StorageError),
}

/// One simulated-and-warehoused configuration, ready to serve tool calls.
pub struct ConfigFixture {
    pub snapshot: OntologySnapshot,
    pub orchestrator: Arc<Orchestrator>,
}

/// Simulate and warehouse every built-in configuration. Shared by the
/// hallucination experiment and the acceptance suite.
pub fn provision_all(days: u32, seed: u64, mode: ConstraintMode) -> Result<Vec<ConfigFixture>, HarnessError> {
    let profile = DisruptionProfile::stable();
    let mut fixtures = Vec::new();
    for template in template_names() {
        let snapshot = builtin_snapshot(template)?;
        let store = SqliteStore::in_memory()?;
        build_schema(&snapshot, &store)?;
        let log = run_simulation(&snapshot, seed, days, &profile);
        ingest(&log, &store)?;
        refresh_star(&store)?;
        let orchestrator = Arc::new(Orchestrator::new(snapshot.clone(), Arc::new(store), mode));
        fixtures.push(ConfigFixture { snapshot, orchestrator });
    }
    Ok(fixtures)
}

/// Classify one executed (or rejected, or failed) query. Total and
/// deterministic in (call, outcome): fabricated beats everything, then
/// execution errors, then empty results, then the correctness check.
pub fn classify(
    case: &QueryCase,
    args: &BTreeMap<String, String>,
    outcome: Option<&CallOutcome>,
    snap: &OntologySnapshot,
    specs: &[ToolSpec],
) -> OutcomeClass {
    let spec = specs.iter().find(|s| s.name == case.tool_name);
    if let Some(spec) = spec {
        for param in &spec.params {
            let Some(kind) = param.entity_kind else { continue };
            let Some(value) = args.get(&param.name) else { continue };
            let ids = snap.id_set(kind.collection()).expect("kind indexed");
            if !ids.contains(value) {
                return OutcomeClass::FabricatedId;
            }
        }
    }
    match outcome {
        None => OutcomeClass::QueryError,
        Some(CallOutcome::Rejected(_)) | Some(CallOutcome::Failed(_)) => OutcomeClass::QueryError,
        Some(CallOutcome::Result(result)) => {
            if result.result["empty"] == serde_json::Value::Bool(true) {
                OutcomeClass::ValidEmptyResult
            } else if args.get(&case.param_name) == Some(&case.expected_id) {
                OutcomeClass::Correct
            } else {
                OutcomeClass::QueryError
            }
        }
    }
}

/// The shipped 72-query set: twelve queries per provisioned configuration,
/// one per tool, in configuration order.
pub fn standard_query_set(fixtures: &[ConfigFixture]) -> Vec<QueryCase> {
    fixtures.iter().flat_map(|f| queries_for(&f.snapshot)).collect()
}

/// Run the standard query set through one condition.
pub fn run_experiment(
    fixtures: &[ConfigFixture],
    client: &mut dyn ModelClient,
    mode: ConstraintMode,
) -> ConditionReport {
    let cases = standard_query_set(fixtures);
    run_experiment_with_cases(fixtures, &cases, client, mode)
}

/// Run an explicit query-case list (for example one loaded from a JSON query
/// set file). Cases execute in list order, the same order a standalone
/// replay of the mock's RNG stream assumes, each against the fixture whose
/// template it names.
pub fn run_experiment_with_cases(
    fixtures: &[ConfigFixture],
    cases: &[QueryCase],
    client: &mut dyn ModelClient,
    mode: ConstraintMode,
) -> ConditionReport {
    let by_template: BTreeMap<&str, &ConfigFixture> = fixtures
        .iter()
        .map(|f| (f.snapshot.template_id(), f))
        .collect();
    let mut sessions: BTreeMap<&str, crate::orchestrator::Session> = BTreeMap::new();
    let mut records = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        let Some(fixture) = by_template.get(case.template_id.as_str()) else {
            records.push(QueryRecord {
                template_id: case.template_id.clone(),
                tool_name: case.tool_name.clone(),
                text: case.text.clone(),
                expected_id: case.expected_id.clone(),
                emitted_value: None,
                outcome: OutcomeClass::QueryError,
            });
            continue;
        };
        let orch = &fixture.orchestrator;
        let specs: Vec<ToolSpec> = orch.tool_specs().to_vec();
        let session = sessions
            .entry(fixture.snapshot.template_id())
            .or_insert_with(|| orch.open_session(crate::orchestrator::DEFAULT_MAX_ROUNDS));
        let question_id = format!("{}-q{:02}", case.template_id, i + 1);
        let planned = client.plan_call(case, &specs, mode);
        let (args, outcome) = match planned {
            Err(ClientError::NoToolCall(_)) | Err(ClientError::Transport(_)) | Err(ClientError::Malformed(_)) => {
                (BTreeMap::new(), None)
            }
            Ok(planned) => {
                let call = ToolCall {
                    call_id: format!("{question_id}-c1"),
                    question_id: question_id.clone(),
                    tool_name: planned.tool_name.clone(),
                    args: planned.args.clone(),
                    snapshot_version: fixture.snapshot.version_id().to_string(),
                };
                let mut outcomes = orch.execute_round(session, &question_id, &[call]);
                (planned.args, Some(outcomes.remove(0)))
            }
        };
        let class = classify(case, &args, outcome.as_ref(), &fixture.snapshot, &specs);
        records.push(QueryRecord {
            template_id: case.template_id.clone(),
            tool_name: case.tool_name.clone(),
            text: case.text.clone(),
            expected_id: case.expected_id.clone(),
            emitted_value: args.get(&case.param_name).cloned(),
            outcome: class,
        });
    }
    aggregate(mode, records, fixtures)
}

fn aggregate(mode: ConstraintMode, records: Vec<QueryRecord>, fixtures: &[ConfigFixture]) -> ConditionReport {
    let count = |class: OutcomeClass| records.iter().filter(|r| r.outcome == class).count();

    let mut per_config = Vec::new();
    for fixture in fixtures {
        let template = fixture.snapshot.template_id();
        let rows: Vec<&QueryRecord> = records.iter().filter(|r| r.template_id == template).collect();
        let fabricated: Vec<&QueryRecord> =
            rows.iter().copied().filter(|r| r.outcome == OutcomeClass::FabricatedId).collect();
        let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &fabricated {
            if let Some(v) = &r.emitted_value {
                *freq.entry(v.as_str()).or_insert(0) += 1;
            }
        }
        let mut top: Vec<(&str, usize)> = freq.into_iter().collect();
        top.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        per_config.push(ConfigRow {
            template_id: template.to_string(),
            queries: rows.len(),
            fabricated: fabricated.len(),
            rate: fabricated.len() as f64 / rows.len().max(1) as f64,
            top_fabrications: top.into_iter().take(3).map(|(v, _)| v.to_string()).collect(),
        });
    }

    let mut per_domain = Vec::new();
    if let Some(first) = fixtures.first() {
        let specs = first.orchestrator.tool_specs();
        for domain in [
            DomainGroup::Production,
            DomainGroup::Quality,
            DomainGroup::Materials,
            DomainGroup::EngineeringChange,
            DomainGroup::Operations,
        ] {
            let tools: Vec<String> = specs
                .iter()
                .filter(|s| s.domain_group == domain)
                .map(|s| s.name.clone())
                .collect();
            let rows: Vec<&QueryRecord> =
                records.iter().filter(|r| tools.contains(&r.tool_name)).collect();
            let fabricated = rows.iter().filter(|r| r.outcome == OutcomeClass::FabricatedId).count();
            per_domain.push(DomainRow {
                domain,
                fabricated,
                runs: rows.len(),
                rate: fabricated as f64 / rows.len().max(1) as f64,
                tools,
            });
        }
    }

    ConditionReport {
        mode,
        queries: records.len(),
        fabricated: count(OutcomeClass::FabricatedId),
        valid_empty: count(OutcomeClass::ValidEmptyResult),
        query_error: count(OutcomeClass::QueryError),
        correct: count(OutcomeClass::Correct),
        per_config,
        per_domain,
        records,
    }
}

fn pct(n: usize, total: usize) -> String {
    format!("{n} ({:.0}%)", 100.0 * n as f64 / total.max(1) as f64)
}

/// Aligned-text rendering of the experiment outcome tables.
pub fn render_report(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Tool-call outcome by condition ({} queries per condition)", report.conditions.first().map_or(0, |c| c.queries));
    let _ = writeln!(
        out,
        "{:<34} {:>8} {:>16} {:>14} {:>12} {:>12}",
        "Condition", "Queries", "Fabricated IDs", "Empty (valid)", "Errors", "Correct"
    );
    for c in &report.conditions {
        let label = match c.mode {
            ConstraintMode::Constrained => "with ontology constraints",
            ConstraintMode::Unconstrained => "without constraints (free text)",
        };
        let _ = writeln!(
            out,
            "{:<34} {:>8} {:>16} {:>14} {:>12} {:>12}",
            label,
            c.queries,
            pct(c.fabricated, c.queries),
            pct(c.valid_empty, c.queries),
            pct(c.query_error, c.queries),
            pct(c.correct, c.queries),
        );
    }
    for c in &report.conditions {
        if c.mode != ConstraintMode::Unconstrained {
            continue;
        }
        let _ = writeln!(out, "\nFabrication by configuration (unconstrained)");
        let _ = writeln!(out, "{:<16} {:>8} {:>12} {:>7}  Most common fabrications", "Configuration", "Queries", "Fabricated", "Rate");
        for row in &c.per_config {
            let _ = writeln!(
                out,
                "{:<16} {:>8} {:>12} {:>6.0}%  {}",
                row.template_id,
                row.queries,
                row.fabricated,
                100.0 * row.rate,
                row.top_fabrications.join(", ")
            );
        }
        let _ = writeln!(out, "\nFabrication by tool domain (unconstrained)");
        let _ = writeln!(out, "{:<20} {:>12} {:>7}  Tools", "Tool domain", "Fabricated", "Rate");
        for row in &c.per_domain {
            let _ = writeln!(
                out,
                "{:<20} {:>7} / {:>2} {:>6.0}%  {}",
                format!("{:?}", row.domain),
                row.fabricated,
                row.runs,
                100.0 * row.rate,
                row.tools.join(", ")
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::client::MockFabricator;
    use std::sync::OnceLock;

    // 15 days is the shortest horizon at which every template has fired a
    // plan revision (longest interval is 14 days), so every golden query has
    // rows. The acceptance suite covers the full 30-day setup.
    fn fixtures() -> &'static Vec<ConfigFixture> {
        static FIXTURES: OnceLock<Vec<ConfigFixture>> = OnceLock::new();
        FIXTURES.get_or_init(|| provision_all(15, 42, ConstraintMode::Constrained).unwrap())
    }

    #[test]
    fn constrained_mock_is_always_correct() {
        let mut mock = MockFabricator::new(0.43, 7);
        let report = run_experiment(fixtures(), &mut mock, ConstraintMode::Constrained);
        assert_eq!(report.queries, 72);
        assert_eq!(report.fabricated, 0);
        assert_eq!(report.correct, 72, "{:#?}", report.records.iter().filter(|r| r.outcome != OutcomeClass::Correct).collect::<Vec<_>>());
    }

    #[test]
    fn unconstrained_fabrications_match_the_standalone_oracle() {
        let seed = 20250508;
        let mut mock = MockFabricator::new(0.43, seed);
        let report = run_experiment(fixtures(), &mut mock, ConstraintMode::Unconstrained);
        let all_cases: Vec<_> = fixtures()
            .iter()
            .flat_map(|f| queries_for(&f.snapshot))
            .collect();
        let oracle = MockFabricator::standalone_fabrication_count(0.43, seed, &all_cases);
        assert_eq!(report.fabricated, oracle);
        assert_eq!(report.queries, 72);
        assert_eq!(
            report.fabricated + report.valid_empty + report.query_error + report.correct,
            72,
            "classes must partition the query set"
        );
    }

    #[test]
    fn zero_probability_collapses_the_conditions() {
        let mut a = MockFabricator::new(0.0, 5);
        let constrained = run_experiment(fixtures(), &mut a, ConstraintMode::Constrained);
        let mut b = MockFabricator::new(0.0, 5);
        let unconstrained = run_experiment(fixtures(), &mut b, ConstraintMode::Unconstrained);
        assert_eq!(constrained.fabricated, unconstrained.fabricated);
        assert_eq!(constrained.correct, unconstrained.correct);
    }

    #[test]
    fn classes_are_mutually_exclusive_and_total() {
        let mut mock = MockFabricator::new(0.5, 99);
        let report = run_experiment(fixtures(), &mut mock, ConstraintMode::Unconstrained);
        assert_eq!(
            report.fabricated + report.valid_empty + report.query_error + report.correct,
            report.queries
        );
        // Every fabricated record's value must be absent from its snapshot.
        for r in &report.records {
            if r.outcome == OutcomeClass::FabricatedId {
                assert_ne!(r.emitted_value.as_deref(), Some(r.expected_id.as_str()));
            }
        }
    }

    #[test]
    fn correct_id_outside_the_horizon_classifies_as_valid_empty() {
        let fixture = &fixtures()[0];
        let orch = &fixture.orchestrator;
        let specs: Vec<ToolSpec> = orch.tool_specs().to_vec();
        let case = queries_for(&fixture.snapshot)
            .into_iter()
            .find(|c| c.tool_name == "cycle_time")
            .unwrap();
        let mut args = BTreeMap::new();
        args.insert(case.param_name.clone(), case.expected_id.clone());
        args.insert("period".to_string(), "2031-W10".to_string());
        let call = ToolCall {
            call_id: "empty-probe".into(),
            question_id: "empty-probe".into(),
            tool_name: case.tool_name.clone(),
            args: args.clone(),
            snapshot_version: fixture.snapshot.version_id().to_string(),
        };
        let mut session = orch.open_session(3);
        let mut outcomes = orch.execute_round(&mut session, "empty-probe", &[call]);
        let outcome = outcomes.remove(0);
        let class = classify(&case, &args, Some(&outcome), &fixture.snapshot, &specs);
        assert_eq!(class, OutcomeClass::ValidEmptyResult);
    }

    #[test]
    fn report_renders_all_three_tables() {
        let mut mock = MockFabricator::new(0.43, 20250508);
        let unconstrained = run_experiment(fixtures(), &mut mock, ConstraintMode::Unconstrained);
        let report = ExperimentReport {
            client: "mock".into(),
            fabrication_probability: Some(0.43),
            client_seed: Some(20250508),
            sim_seed: 42,
            days: 10,
            conditions: vec![unconstrained],
        };
        let text = render_report(&report);
        assert!(text.contains("without constraints"));
        assert!(text.contains("Fabrication by configuration"));
        assert!(text.contains("Fabrication by tool domain"));
        assert!(text.contains("aerospace"));
    }
}
