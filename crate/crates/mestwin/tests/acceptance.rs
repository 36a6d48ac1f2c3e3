//! Acceptance suite: one test per release criterion, each printing a
//! PASS line when it holds. Run with:
//!
//! ```text
//! cargo test --test acceptance -- --nocapture
//! ```

use std::collections::BTreeMap;
use std::process::Command;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use mestwin::contract::{resolve, EntityKind};
use mestwin::harness::{
    provision_all, queries_for, run_calibration, run_experiment, ConfigFixture, Kpi,
    MockFabricator, RecursiveAgent, DEFAULT_CLIENT_SEED, DEFAULT_FABRICATION_PROBABILITY,
};
use mestwin::ontology::{
    builtin_expected_counts, builtin_snapshot, load_document_str, measure_counts, snapshot,
    template_names, template_source, LoadError,
};
use mestwin::orchestrator::Orchestrator;
use mestwin::server::{rpc, Router};
use mestwin::sim::{run_simulation, DisruptionProfile};
use mestwin::tools::ConstraintMode;
use mestwin::warehouse::{count_rows, table_defs, TableKind};

const ACCEPTANCE_DAYS: u32 = 30;
const ACCEPTANCE_SIM_SEED: u64 = 42;

/// All six configurations simulated for 30 days at seed 42 and warehoused ,
/// the standard experimental setup, provisioned once for the whole suite.
fn fixtures() -> &'static Vec<ConfigFixture> {
    static FIXTURES: OnceLock<Vec<ConfigFixture>> = OnceLock::new();
    FIXTURES.get_or_init(|| {
        provision_all(ACCEPTANCE_DAYS, ACCEPTANCE_SIM_SEED, ConstraintMode::Constrained)
            .expect("provisioning the six standard configurations")
    })
}

fn unconstrained_view(fixture: &ConfigFixture) -> ConfigFixture {
    ConfigFixture {
        snapshot: fixture.snapshot.clone(),
        orchestrator: Arc::new(Orchestrator::new(
            fixture.snapshot.clone(),
            fixture.orchestrator.store().clone(),
            ConstraintMode::Unconstrained,
        )),
    }
}

#[test]
fn criterion_01_export_contract_validation() {
    let started = Instant::now();
    let mut checks = 0;
    for template in template_names() {
        let source = template_source(template).unwrap();
        let value: serde_json::Value = serde_json::from_str(source).unwrap();
        for key in mestwin::ontology::REQUIRED_EXPORTS {
            let mut mutated = value.clone();
            mutated.as_object_mut().unwrap().remove(key);
            match load_document_str(&mutated.to_string()) {
                Err(LoadError::MissingExports(names)) => {
                    assert_eq!(names, vec![key.to_string()], "{template}: wrong name set for {key}");
                }
                other => panic!("{template}: deleting {key} must fail with MissingExports, got {other:?}"),
            }
            checks += 1;
        }
    }
    let elapsed = started.elapsed();
    assert_eq!(checks, 270);
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    println!("acceptance 01 export-contract-validation: PASS ({checks} mutations rejected in {elapsed:.2?})");
}

#[test]
fn criterion_02_complexity_conformance() {
    for template in template_names() {
        let doc = mestwin::ontology::load_builtin(template).unwrap();
        let expected = builtin_expected_counts(template).unwrap();
        let measured = measure_counts(&doc);
        assert_eq!(measured, expected, "{template}");
    }
    println!("acceptance 02 complexity-conformance: PASS (6 templates match their published rows exactly)");
}

#[test]
fn criterion_03_gate_soundness_zero_fabrication() {
    let fixtures = fixtures();
    let mut mock = MockFabricator::new(DEFAULT_FABRICATION_PROBABILITY, DEFAULT_CLIENT_SEED);
    let report = run_experiment(fixtures, &mut mock, ConstraintMode::Constrained);
    assert_eq!(report.queries, 72);
    assert_eq!(report.fabricated, 0, "constrained mode must fabricate nothing");
    assert_eq!(
        report.correct, 72,
        "non-correct: {:?}",
        report
            .records
            .iter()
            .filter(|r| r.outcome != mestwin::harness::OutcomeClass::Correct)
            .collect::<Vec<_>>()
    );

    // The structural half: a rejected call never reaches the storage port.
    let aero = &fixtures[0];
    let orch = &aero.orchestrator;
    let mut session = orch.open_session(3);
    let before = orch.store().op_count();
    let bad = mestwin::orchestrator::ToolCall {
        call_id: "reject-probe".into(),
        question_id: "reject-probe".into(),
        tool_name: "cycle_time".into(),
        args: [("station_id".to_string(), "BOND-1".to_string())].into_iter().collect(),
        snapshot_version: aero.snapshot.version_id().to_string(),
    };
    let outcomes = orch.execute_round(&mut session, "reject-probe", &[bad]);
    assert!(matches!(outcomes[0], mestwin::orchestrator::CallOutcome::Rejected(_)));
    assert_eq!(orch.store().op_count(), before, "rejected call must not touch storage");
    println!("acceptance 03 gate-soundness: PASS (72/72 correct, 0 fabricated, rejected call ran 0 queries)");
}

#[test]
fn criterion_04_unconstrained_calibration() {
    let fixtures = fixtures();
    let views: Vec<ConfigFixture> = fixtures.iter().map(unconstrained_view).collect();
    let all_cases: Vec<_> = views.iter().flat_map(|f| queries_for(&f.snapshot)).collect();

    // The pinned documented seed, plus spot checks at other seeds. Expected
    // counts come from replaying the mock's RNG stream standalone.
    let mut detail = String::new();
    for (i, seed) in [DEFAULT_CLIENT_SEED, 20250504, 20250510, 20250517].into_iter().enumerate() {
        let oracle = MockFabricator::standalone_fabrication_count(
            DEFAULT_FABRICATION_PROBABILITY,
            seed,
            &all_cases,
        );
        let mut mock = MockFabricator::new(DEFAULT_FABRICATION_PROBABILITY, seed);
        let report = run_experiment(&views, &mut mock, ConstraintMode::Unconstrained);
        assert_eq!(report.queries, 72);
        assert_eq!(report.fabricated, oracle, "seed {seed}: end-to-end count must equal the oracle");
        let rate = report.fabricated as f64 / report.queries as f64;
        assert!(
            (0.35..=0.50).contains(&rate),
            "seed {seed}: rate {rate:.3} outside [0.35, 0.50]"
        );
        if i == 0 {
            assert_eq!(report.fabricated, 31, "documented seed is calibrated to 31/72");
            detail = format!("{}/72 fabricated ({:.0}%) at the documented seed", report.fabricated, rate * 100.0);
        }
        assert_eq!(
            report.fabricated + report.valid_empty + report.query_error + report.correct,
            72
        );
    }
    println!("acceptance 04 unconstrained-calibration: PASS ({detail}; 3 spot-check seeds in band)");
}

#[test]
fn criterion_05_rejection_payload() {
    let snap = builtin_snapshot("aerospace").unwrap();
    let err = resolve("BOND-1", EntityKind::Station, &snap).unwrap_err();
    assert_eq!(err.valid_set, vec!["S1", "S2", "S3", "S4", "S5", "S6"]);
    let payload = err.wire_payload();
    assert_eq!(payload["error"], "invalid_parameter");
    assert_eq!(payload["valid"], serde_json::json!(["S1", "S2", "S3", "S4", "S5", "S6"]));

    // The identical payload must surface in the wire-level JSON-RPC error.
    let aero = &fixtures()[0];
    let router = Router::new(aero.orchestrator.clone());
    let response: serde_json::Value = serde_json::from_str(&router.handle_line(
        &serde_json::json!({
            "jsonrpc": "2.0", "id": 1, "method": "tools/call",
            "params": {"name": "cycle_time", "arguments": {"station_id": "BOND-1"}},
        })
        .to_string(),
    ))
    .unwrap();
    assert_eq!(response["error"]["code"], rpc::GATE_REJECTED);
    assert_eq!(response["error"]["data"], payload);
    println!("acceptance 05 rejection-payload: PASS (valid set [S1..S6] both in-process and on the wire)");
}

#[test]
fn criterion_06_calibration_bands() {
    let started = Instant::now();
    let seeds: Vec<u64> = (0..10).map(|i| mestwin::harness::CALIBRATION_BASE_SEED + i).collect();
    let report = run_calibration(
        &["aerospace", "pharma", "automotive", "electronics"],
        &seeds,
        30,
        &DisruptionProfile::stable(),
    )
    .unwrap();
    let elapsed = started.elapsed();

    assert_eq!(report.rows.len(), 12);
    for row in &report.rows {
        assert!(!row.insufficient_samples, "{}/{:?}", row.template_id, row.kpi);
        assert!(
            row.within_target,
            "{}/{:?}: mean {:.4} outside [{:.4}, {:.4}] (ci {:?})",
            row.template_id, row.kpi, row.mean, row.target_low, row.target_high, row.ci95
        );
    }
    // Spot checks against the published bands.
    let aero_fpy = report
        .rows
        .iter()
        .find(|r| r.template_id == "aerospace" && r.kpi == Kpi::PerStationFpy)
        .unwrap();
    assert!(aero_fpy.mean >= 0.94 && aero_fpy.mean <= 0.97, "{}", aero_fpy.mean);
    let elec_tp = report
        .rows
        .iter()
        .find(|r| r.template_id == "electronics" && r.kpi == Kpi::DailyThroughput)
        .unwrap();
    assert!((elec_tp.mean - 20.0).abs() <= 1.0, "{}", elec_tp.mean);

    assert!(elapsed < Duration::from_secs(300), "calibration took {elapsed:?}");
    println!(
        "acceptance 06 calibration-bands: PASS (12/12 KPIs in band over 40 runs in {elapsed:.1?})"
    );
}

#[test]
fn criterion_07_determinism() {
    // In-process: byte-identical logs.
    let snap = builtin_snapshot("aerospace").unwrap();
    let a = run_simulation(&snap, 42, 30, &DisruptionProfile::stable());
    let b = run_simulation(&snap, 42, 30, &DisruptionProfile::stable());
    assert_eq!(a.to_ndjson(), b.to_ndjson(), "same-process logs must be byte-identical");

    // Through the binary, twice: identical --log-hash output.
    let run_cli = || {
        let output = Command::new(env!("CARGO_BIN_EXE_mestwin"))
            .args(["simulate", "aerospace", "--seed", "42", "--days", "30", "--log-hash"])
            .output()
            .expect("binary runs");
        assert!(output.status.success());
        String::from_utf8(output.stdout).unwrap().trim().to_string()
    };
    let h1 = run_cli();
    let h2 = run_cli();
    assert_eq!(h1, h2, "CLI runs must hash identically");
    assert_eq!(h1, a.content_hash(), "CLI and API must agree");
    println!("acceptance 07 determinism: PASS (log hash {} stable across runs)", &h1[..16]);
}

#[test]
fn criterion_08_volume_sanity() {
    let aero = &fixtures()[0];
    assert_eq!(aero.snapshot.template_id(), "aerospace");
    let store = aero.orchestrator.store();
    let mut populated = 0usize;
    let mut total_rows = 0u64;
    let mut by_table = BTreeMap::new();
    for def in table_defs().iter().filter(|d| d.kind == TableKind::Operational) {
        let rows = count_rows(store.as_ref(), def.name).unwrap();
        if rows > 0 {
            populated += 1;
            total_rows += rows;
            by_table.insert(def.name, rows);
        }
    }
    assert!(populated >= 40, "only {populated} operational tables populated: {by_table:?}");
    assert!(
        (10_000..=25_000).contains(&total_rows),
        "total operational rows {total_rows} outside [10000, 25000]"
    );
    println!(
        "acceptance 08 volume-sanity: PASS ({populated} operational tables, {total_rows} rows)"
    );
}

#[test]
fn criterion_09_star_schema_shape() {
    for template in template_names() {
        let snap = builtin_snapshot(template).unwrap();
        let store = mestwin::warehouse::SqliteStore::in_memory().unwrap();
        let manifest = mestwin::warehouse::build_schema(&snap, &store).unwrap();
        assert_eq!(
            (manifest.dimension_tables, manifest.fact_tables, manifest.bridge_tables),
            (14, 8, 1),
            "{template}"
        );
        assert_eq!(
            manifest.tables.iter().filter(|t| t.kind != TableKind::Operational).count(),
            23,
            "{template}"
        );
    }
    println!("acceptance 09 star-schema-shape: PASS (23 analytics tables = 14 + 8 + 1 for all 6 templates)");
}

#[test]
fn criterion_10_circuit_breaker() {
    let aero = &fixtures()[0];
    let orch = &aero.orchestrator;
    let agent = RecursiveAgent::new(2, 10);

    let mut capped = orch.open_session(3);
    let capped_stats = agent.run_question(orch, &mut capped, "capped-question");
    assert!(capped_stats.stopped_by_circuit, "breaker must fire");
    assert!(capped_stats.rounds_executed <= 3, "{capped_stats:?}");
    assert_eq!(capped.rounds_used("capped-question"), 3);
    assert!(capped_stats.calls_executed <= 3 * 2);

    let mut uncapped = orch.open_session(u32::MAX);
    let uncapped_stats = agent.run_question(orch, &mut uncapped, "uncapped-question");
    assert!(!uncapped_stats.stopped_by_circuit);
    assert!(
        uncapped_stats.calls_executed > 10,
        "uncapped run should exceed 10 calls, did {}",
        uncapped_stats.calls_executed
    );
    println!(
        "acceptance 10 circuit-breaker: PASS (capped {} calls in <=3 rounds, uncapped {} calls)",
        capped_stats.calls_executed, uncapped_stats.calls_executed
    );
}

#[test]
fn criterion_11_version_consistency() {
    let aero = &fixtures()[0];
    let orch = &aero.orchestrator;

    // A call stamped with version A against a session pinned to version B.
    let mut tweaked = aero.snapshot.document().clone();
    tweaked.stations.get_mut("S1").unwrap().first_pass_yield = 0.955;
    let other = snapshot(tweaked, "aerospace-tweaked");
    let mut session = orch.open_session(3);
    let stale = mestwin::orchestrator::ToolCall {
        call_id: "stale".into(),
        question_id: "stale".into(),
        tool_name: "cycle_time".into(),
        args: [("station_id".to_string(), "S4".to_string())].into_iter().collect(),
        snapshot_version: other.version_id().to_string(),
    };
    let rejection = orch.gate(&session, &stale).unwrap_err();
    assert!(matches!(
        rejection.reason,
        mestwin::orchestrator::RejectReason::VersionMismatch { .. }
    ));
    let outcomes = orch.execute_round(&mut session, "stale", &[stale]);
    assert!(matches!(outcomes[0], mestwin::orchestrator::CallOutcome::Rejected(_)));

    // Two agents in one session see byte-identical tools/list responses.
    let router = Router::new(orch.clone());
    let open: serde_json::Value = serde_json::from_str(&router.handle_line(
        &serde_json::json!({
            "jsonrpc": "2.0", "id": 1, "method": "session/open",
            "params": {"agents": ["agent-a", "agent-b"]},
        })
        .to_string(),
    ))
    .unwrap();
    assert_eq!(open["result"]["agents"], serde_json::json!(["agent-a", "agent-b"]));
    let list = |id: u32| {
        router.handle_line(
            &serde_json::json!({"jsonrpc": "2.0", "id": id, "method": "tools/list"}).to_string(),
        )
        .replace(&format!("\"id\":{id}"), "\"id\":0")
    };
    assert_eq!(list(2), list(3), "tool federation must be identical across agents");
    println!("acceptance 11 version-consistency: PASS (stale stamp rejected; federation identical)");
}

#[test]
fn criterion_12_resolution_scaling() {
    // Build a synthetic 10,000-station document on the aerospace base.
    let source = template_source("aerospace").unwrap();
    let mut value: serde_json::Value = serde_json::from_str(source).unwrap();
    let s1 = value["STATIONS"]["S1"].clone();
    let s1_codes = value["STATION_FAILURE_CODES"]["S1"].clone();
    let s1_plan = value["STATION_INSPECTION_PLANS"]["S1"].clone();
    for i in 7..=10_000 {
        let id = format!("S{i}");
        let mut station = s1.clone();
        station["name"] = serde_json::json!(format!("Synthetic Cell {i}"));
        value["STATIONS"][&id] = station;
        value["STATION_TO_WC"][&id] = serde_json::json!("WC-CNC");
        value["STATION_FAILURE_CODES"][&id] = s1_codes.clone();
        value["STATION_INSPECTION_PLANS"][&id] = s1_plan.clone();
    }
    let big_doc = load_document_str(&value.to_string()).unwrap();
    assert_eq!(big_doc.stations.len(), 10_000);
    let big = snapshot(big_doc, "aerospace-10k");
    let small = builtin_snapshot("aerospace").unwrap();

    let median_latency = |snap: &mestwin::ontology::OntologySnapshot, ids: &[String]| -> f64 {
        const BATCH: usize = 250;
        const BATCHES: usize = 600; // 150k calls
        let mut samples = Vec::with_capacity(BATCHES);
        let mut cursor = 0usize;
        for _ in 0..BATCHES {
            let started = Instant::now();
            for _ in 0..BATCH {
                let id = &ids[cursor % ids.len()];
                cursor += 1;
                let node = resolve(std::hint::black_box(id), EntityKind::Station, snap).unwrap();
                std::hint::black_box(node);
            }
            samples.push(started.elapsed().as_nanos() as f64 / BATCH as f64);
        }
        samples.sort_by(f64::total_cmp);
        samples[samples.len() / 2]
    };

    let small_ids: Vec<String> = small.id_set("STATIONS").unwrap().sorted().to_vec();
    let big_ids: Vec<String> = big.id_set("STATIONS").unwrap().sorted().to_vec();
    // Warm-up pass, then measure.
    median_latency(&small, &small_ids);
    median_latency(&big, &big_ids);
    let small_med = median_latency(&small, &small_ids);
    let big_med = median_latency(&big, &big_ids);
    assert!(
        big_med <= 2.0 * small_med,
        "10k-entity median {big_med:.1}ns vs 6-entity {small_med:.1}ns exceeds 2x"
    );
    println!(
        "acceptance 12 resolution-scaling: PASS (median {small_med:.0}ns at 6 stations, {big_med:.0}ns at 10000, over 150k calls each)"
    );
}
