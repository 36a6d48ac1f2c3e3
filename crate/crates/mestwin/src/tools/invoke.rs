use std::collections::BTreeMap;

use serde_json::{json, Value};
use thiserror::Error;

use crate::contract::{
    annotate, annotate_unscoped, contextualize, resolve, AnnotatedResult, ContractError,
    EntityKind, NodeRef, ResolutionError,
};
use crate::ontology::OntologySnapshot;
use crate::warehouse::{SqlValue, StorageError, StoragePort};

use super::catalog::ToolSpec;
use super::period::{parse_period, DateWindow};

#[derive(Debug, Error)]
pub enum ToolError {
    /// The designed rejection path: an entity argument did not resolve.
    #[error(transparent)]
    Resolution(#[from] ResolutionError),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error("unknown tool '{0}'")]
    UnknownTool(String),
    #[error("tool '{tool}' has no parameter '{name}'")]
    UnknownParameter { tool: String, name: String },
    #[error("tool '{tool}' requires parameter '{name}'")]
    MissingParameter { tool: String, name: String },
    #[error("invalid period: {0}")]
    InvalidPeriod(String),
    #[error(transparent)]
    Storage(#[from] StorageError),
}

/// A typed tool result: explicit fields, never a raw tabular dump. An empty
/// result is a first-class outcome that says zero rows matched; it makes no
/// claim about the health of anything.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolResult {
    pub entity: BTreeMap<String, String>,
    pub metric: String,
    pub value: Option<f64>,
    pub unit: String,
    pub period: String,
    pub breakdown: Vec<Value>,
    pub empty: bool,
    pub note: Option<String>,
}

impl ToolResult {
    /// Wire shape: entity fields flattened to the top level, then the fixed
    /// metric/value/unit/period/breakdown fields.
    pub fn to_wire(&self) -> Value {
        let mut obj = serde_json::Map::new();
        for (k, v) in &self.entity {
            obj.insert(k.clone(), json!(v));
        }
        obj.insert("metric".into(), json!(self.metric));
        obj.insert("value".into(), self.value.map_or(Value::Null, |v| json!(v)));
        obj.insert("unit".into(), json!(self.unit));
        obj.insert("period".into(), json!(self.period));
        obj.insert("breakdown".into(), Value::Array(self.breakdown.clone()));
        obj.insert("empty".into(), json!(self.empty));
        if let Some(note) = &self.note {
            obj.insert("note".into(), json!(note));
        }
        Value::Object(obj)
    }

    fn empty_marker(mut self) -> Self {
        self.empty = true;
        self.note = Some("zero rows matched".into());
        self.value = None;
        self
    }
}

struct Ctx<'a> {
    snap: &'a OntologySnapshot,
    store: &'a dyn StoragePort,
    window: Option<DateWindow>,
    period_label: String,
    entity: BTreeMap<String, String>,
}

impl<'a> Ctx<'a> {
    /// Append `AND <col> BETWEEN ? AND ?` when a period window applies.
    fn date_filter(&self, column: &str, params: &mut Vec<SqlValue>) -> String {
        match &self.window {
            Some(w) => {
                params.push(SqlValue::Text(w.start_key.clone()));
                params.push(SqlValue::Text(w.end_key.clone()));
                format!(" AND {column} BETWEEN ?{} AND ?{}", params.len() - 1, params.len())
            }
            None => String::new(),
        }
    }
}

/// Execute one tool call. Every entity-kind argument is resolved against the
/// snapshot first (storage is unreachable for a fabricated identifier), and
/// every successful result is annotated with the primary entity's context and
/// the snapshot version.
pub fn invoke(
    spec: &ToolSpec,
    args: &BTreeMap<String, String>,
    snap: &OntologySnapshot,
    store: &dyn StoragePort,
) -> Result<AnnotatedResult, ToolError> {
    for name in args.keys() {
        if spec.param(name).is_none() {
            return Err(ToolError::UnknownParameter { tool: spec.name.clone(), name: name.clone() });
        }
    }
    for param in &spec.params {
        if param.required && !args.contains_key(&param.name) {
            return Err(ToolError::MissingParameter { tool: spec.name.clone(), name: param.name.clone() });
        }
    }

    // Resolve every entity argument, in declared parameter order.
    let mut nodes: BTreeMap<String, NodeRef> = BTreeMap::new();
    let mut primary: Option<NodeRef> = None;
    for param in &spec.params {
        let Some(kind) = param.entity_kind else { continue };
        let Some(value) = args.get(&param.name) else { continue };
        let node = resolve(value, kind, snap)?;
        if primary.is_none() {
            primary = Some(node.clone());
        }
        nodes.insert(param.name.clone(), node);
    }

    // A failure code supplied next to a station resolves against that
    // station's scoped set, not the global one.
    if let (Some(station), Some(code)) = (nodes.get("station_id"), nodes.get("failure_code")) {
        let scoped = &snap.document().station_failure_codes[&station.id];
        if !scoped.contains(&code.id) {
            let mut valid_set = scoped.clone();
            valid_set.sort();
            return Err(ToolError::Resolution(ResolutionError {
                kind: EntityKind::FailureCode,
                rejected_value: code.id.clone(),
                valid_set,
            }));
        }
    }

    let window = match args.get("period") {
        Some(text) => Some(parse_period(text).map_err(ToolError::InvalidPeriod)?),
        None => None,
    };
    let period_label = args.get("period").cloned().unwrap_or_else(|| "full-horizon".to_string());

    let mut entity = BTreeMap::new();
    for (param, node) in &nodes {
        let field = match param.as_str() {
            "station_id" => "station",
            "failure_code" => "failure_code",
            "disposition" => "disposition",
            "material_id" => "material",
            "supplier_id" => "supplier",
            other => other,
        };
        entity.insert(field.to_string(), node.id.clone());
    }
    if let Some(order) = args.get("order_id") {
        entity.insert("order".into(), order.clone());
    }

    let ctx = Ctx { snap, store, window, period_label, entity };
    let result = match spec.name.as_str() {
        "cycle_time" => cycle_time(&ctx, &nodes)?,
        "first_pass_yield" => first_pass_yield(&ctx, &nodes)?,
        "oee_decomposition" => oee_decomposition(&ctx, &nodes)?,
        "ncr_pareto" => ncr_pareto(&ctx, &nodes)?,
        "spc_violation" => spc_violation(&ctx, &nodes)?,
        "quality_action" => quality_action(&ctx, &nodes)?,
        "material_genealogy" => material_genealogy(&ctx, &nodes, args)?,
        "supplier_performance" => supplier_performance(&ctx, &nodes)?,
        "change_impact" => change_impact(&ctx, &nodes)?,
        "change_velocity" => change_velocity(&ctx, &nodes)?,
        "equipment_downtime" => equipment_downtime(&ctx, &nodes)?,
        "production_status" => production_status(&ctx, &nodes)?,
        other => return Err(ToolError::UnknownTool(other.to_string())),
    };

    let wire = result.to_wire();
    Ok(match primary {
        Some(node) => {
            let domain = contextualize(&node, snap)?;
            annotate(wire, &domain, snap)?
        }
        None => annotate_unscoped(wire, snap),
    })
}

fn station_filter(nodes: &BTreeMap<String, NodeRef>, column: &str, params: &mut Vec<SqlValue>) -> String {
    match nodes.get("station_id") {
        Some(node) => {
            params.push(SqlValue::Text(node.id.clone()));
            format!(" AND {column} = ?{}", params.len())
        }
        None => String::new(),
    }
}

fn base_result(ctx: &Ctx, metric: &str, unit: &str) -> ToolResult {
    ToolResult {
        entity: ctx.entity.clone(),
        metric: metric.to_string(),
        value: None,
        unit: unit.to_string(),
        period: ctx.period_label.clone(),
        breakdown: Vec::new(),
        empty: false,
        note: None,
    }
}

fn cycle_time(ctx: &Ctx, nodes: &BTreeMap<String, NodeRef>) -> Result<ToolResult, ToolError> {
    let station = &nodes["station_id"].id;
    let mut params = vec![SqlValue::Text(station.clone())];
    let date = ctx.date_filter("date_key", &mut params);
    let rows = ctx.store.query(
        &format!(
            "SELECT COUNT(*) AS n, AVG(cycle_min) AS avg_cycle, MIN(cycle_min) AS min_cycle, \
             MAX(cycle_min) AS max_cycle, AVG(setup_min) AS avg_setup \
             FROM fact_operation_execution WHERE station_key = ?1{date}"
        ),
        &params,
    )?;
    let n = rows[0]["n"].as_i64().unwrap_or(0);
    let mut result = base_result(ctx, "cycle_time_avg", "min");
    if n == 0 {
        return Ok(result.empty_marker());
    }
    result.value = rows[0]["avg_cycle"].as_f64();
    result.note = Some(format!(
        "{} operations; cycle min {:.1}, max {:.1}; avg setup {:.1} min",
        n,
        rows[0]["min_cycle"].as_f64().unwrap_or(0.0),
        rows[0]["max_cycle"].as_f64().unwrap_or(0.0),
        rows[0]["avg_setup"].as_f64().unwrap_or(0.0),
    ));

    let mut params = vec![SqlValue::Text(station.clone())];
    let date = ctx.date_filter("date_key", &mut params);
    let daily = ctx.store.query(
        &format!(
            "SELECT date_key, COUNT(*) AS n, AVG(cycle_min) AS avg_cycle \
             FROM fact_operation_execution WHERE station_key = ?1{date} \
             GROUP BY date_key ORDER BY date_key"
        ),
        &params,
    )?;
    result.breakdown = daily
        .iter()
        .map(|r| {
            json!({
                "date": r["date_key"].as_str(),
                "operations": r["n"].as_i64(),
                "avg_cycle_min": r["avg_cycle"].as_f64(),
            })
        })
        .collect();
    Ok(result)
}

fn first_pass_yield(ctx: &Ctx, nodes: &BTreeMap<String, NodeRef>) -> Result<ToolResult, ToolError> {
    let station = &nodes["station_id"].id;
    let mut params = vec![SqlValue::Text(station.clone())];
    let date = ctx.date_filter("date_key", &mut params);
    let rows = ctx.store.query(
        &format!(
            "SELECT COUNT(*) AS n, SUM(CASE result WHEN 'pass' THEN 1 ELSE 0 END) AS passes \
             FROM fact_inspection_result WHERE station_key = ?1{date}"
        ),
        &params,
    )?;
    let n = rows[0]["n"].as_i64().unwrap_or(0);
    let mut result = base_result(ctx, "first_pass_yield", "ratio");
    if n == 0 {
        return Ok(result.empty_marker());
    }
    let passes = rows[0]["passes"].as_i64().unwrap_or(0);
    result.value = Some(passes as f64 / n as f64);
    result.note = Some(format!("{passes} of {n} inspections passed first time"));

    let mut params = vec![SqlValue::Text(station.clone())];
    let date = ctx.date_filter("date_key", &mut params);
    let daily = ctx.store.query(
        &format!(
            "SELECT date_key, COUNT(*) AS n, SUM(CASE result WHEN 'pass' THEN 1 ELSE 0 END) AS passes \
             FROM fact_inspection_result WHERE station_key = ?1{date} \
             GROUP BY date_key ORDER BY date_key"
        ),
        &params,
    )?;
    result.breakdown = daily
        .iter()
        .map(|r| {
            let n = r["n"].as_i64().unwrap_or(0).max(1);
            json!({
                "date": r["date_key"].as_str(),
                "inspections": r["n"].as_i64(),
                "fpy": r["passes"].as_i64().unwrap_or(0) as f64 / n as f64,
            })
        })
        .collect();
    Ok(result)
}

fn oee_decomposition(ctx: &Ctx, nodes: &BTreeMap<String, NodeRef>) -> Result<ToolResult, ToolError> {
    let station = &nodes["station_id"].id;

    let mut params = vec![SqlValue::Text(station.clone())];
    let date = ctx.date_filter("date_key", &mut params);
    let ops = ctx.store.query(
        &format!(
            "SELECT COUNT(*) AS n, AVG(cycle_min) AS avg_cycle, \
             SUM(CASE WHEN passed = 1 THEN 1 ELSE 0 END) AS passes \
             FROM fact_operation_execution WHERE station_key = ?1{date}"
        ),
        &params,
    )?;
    let n = ops[0]["n"].as_i64().unwrap_or(0);
    let mut result = base_result(ctx, "oee", "ratio");
    if n == 0 {
        return Ok(result.empty_marker());
    }
    let quality = ops[0]["passes"].as_i64().unwrap_or(0) as f64 / n as f64;
    let avg_cycle = ops[0]["avg_cycle"].as_f64().unwrap_or(1.0);

    // Ideal cycle = midpoint of the configured range.
    let cfg = &ctx.snap.document().stations[station];
    let ideal = (cfg.cycle_time_range_min.0 + cfg.cycle_time_range_min.1) / 2.0;
    let performance = (ideal / avg_cycle).min(1.0);

    // Planned time = shift minutes on operating days in the window, per unit.
    let mut params: Vec<SqlValue> = Vec::new();
    let date = ctx.date_filter("date_key", &mut params);
    let days = ctx.store.query(
        &format!("SELECT COUNT(*) AS n FROM dim_date WHERE is_operating = 1{date}"),
        &params,
    )?;
    let operating_days = days[0]["n"].as_i64().unwrap_or(0).max(1);
    let shift_minutes = ctx
        .store
        .query("SELECT SUM(end_min - start_min) AS m FROM dim_shift", &[])?[0]["m"]
        .as_i64()
        .unwrap_or(960);
    let units = ctx.store.query(
        "SELECT COUNT(*) AS n FROM dim_equipment WHERE station_key = ?1",
        &[SqlValue::Text(station.clone())],
    )?[0]["n"]
        .as_i64()
        .unwrap_or(1)
        .max(1);
    let planned = (operating_days * shift_minutes * units) as f64;

    let mut params = vec![SqlValue::Text(station.clone())];
    let date = ctx.date_filter("date_key", &mut params);
    let down = ctx.store.query(
        &format!(
            "SELECT COALESCE(SUM(duration_min), 0) AS m FROM fact_equipment_downtime \
             WHERE station_key = ?1{date}"
        ),
        &params,
    )?[0]["m"]
        .as_i64()
        .unwrap_or(0) as f64;
    let availability = ((planned - down) / planned).clamp(0.0, 1.0);

    let oee = availability * performance * quality;
    result.value = Some(oee);
    result.breakdown = vec![
        json!({"factor": "availability", "value": availability}),
        json!({"factor": "performance", "value": performance}),
        json!({"factor": "quality", "value": quality}),
    ];
    result.note = Some(
        "oee = availability x performance x quality; availability = 1 - downtime/planned shift \
         minutes, performance = configured midpoint cycle / observed avg (capped at 1), quality = \
         first-pass yield over executed operations"
            .into(),
    );
    Ok(result)
}

fn ncr_pareto(ctx: &Ctx, nodes: &BTreeMap<String, NodeRef>) -> Result<ToolResult, ToolError> {
    let mut params: Vec<SqlValue> = Vec::new();
    let station = station_filter(nodes, "f.station_key", &mut params);
    let code = match nodes.get("failure_code") {
        Some(node) => {
            params.push(SqlValue::Text(node.id.clone()));
            format!(" AND f.failure_code_key = ?{}", params.len())
        }
        None => String::new(),
    };
    let date = ctx.date_filter("f.date_key", &mut params);
    let rows = ctx.store.query(
        &format!(
            "SELECT f.failure_code_key AS code, d.description AS description, COUNT(*) AS n \
             FROM fact_ncr f JOIN dim_failure_code d ON d.failure_code_key = f.failure_code_key \
             WHERE 1=1{station}{code}{date} \
             GROUP BY f.failure_code_key, d.description \
             ORDER BY n DESC, f.failure_code_key ASC"
        ),
        &params,
    )?;
    let mut result = base_result(ctx, "ncr_count", "count");
    if rows.is_empty() {
        return Ok(result.empty_marker());
    }
    let total: i64 = rows.iter().map(|r| r["n"].as_i64().unwrap_or(0)).sum();
    result.value = Some(total as f64);
    result.breakdown = rows
        .iter()
        .map(|r| {
            json!({
                "failure_code": r["code"].as_str(),
                "description": r["description"].as_str(),
                "count": r["n"].as_i64(),
            })
        })
        .collect();
    Ok(result)
}

fn spc_violation(ctx: &Ctx, nodes: &BTreeMap<String, NodeRef>) -> Result<ToolResult, ToolError> {
    let station = &nodes["station_id"].id;
    let mut params = vec![SqlValue::Text(station.clone())];
    let date = ctx.date_filter("date_key", &mut params);
    let rows = ctx.store.query(
        &format!(
            "SELECT characteristic, \
             SUM(CASE WHEN in_control = 0 THEN 1 ELSE 0 END) AS violations, \
             COUNT(*) AS samples \
             FROM fact_spc_sample WHERE station_key = ?1{date} \
             GROUP BY characteristic ORDER BY violations DESC, characteristic ASC"
        ),
        &params,
    )?;
    let total: i64 = rows.iter().map(|r| r["violations"].as_i64().unwrap_or(0)).sum();
    let samples: i64 = rows.iter().map(|r| r["samples"].as_i64().unwrap_or(0)).sum();
    let mut result = base_result(ctx, "spc_violations", "count");
    if total == 0 {
        result = result.empty_marker();
        result.note = Some(format!("zero rows matched ({samples} samples in scope)"));
        return Ok(result);
    }
    result.value = Some(total as f64);
    result.note = Some(format!("{total} out-of-limit samples across {samples} measurements"));
    result.breakdown = rows
        .iter()
        .filter(|r| r["violations"].as_i64().unwrap_or(0) > 0)
        .map(|r| {
            json!({
                "characteristic": r["characteristic"].as_str(),
                "violations": r["violations"].as_i64(),
                "samples": r["samples"].as_i64(),
            })
        })
        .collect();
    Ok(result)
}

fn quality_action(ctx: &Ctx, nodes: &BTreeMap<String, NodeRef>) -> Result<ToolResult, ToolError> {
    let mut params: Vec<SqlValue> = Vec::new();
    let dispo = match nodes.get("disposition") {
        Some(node) => {
            params.push(SqlValue::Text(node.id.clone()));
            format!(" AND disposition = ?{}", params.len())
        }
        None => String::new(),
    };
    let date = ctx.date_filter("date_key", &mut params);
    let rows = ctx.store.query(
        &format!(
            "SELECT disposition, COUNT(*) AS n, SUM(capa_flag) AS capa \
             FROM fact_ncr WHERE 1=1{dispo}{date} \
             GROUP BY disposition ORDER BY n DESC, disposition ASC"
        ),
        &params,
    )?;
    let mut result = base_result(ctx, "quality_actions", "count");
    if rows.is_empty() {
        return Ok(result.empty_marker());
    }
    let total: i64 = rows.iter().map(|r| r["n"].as_i64().unwrap_or(0)).sum();
    let capa: i64 = rows.iter().map(|r| r["capa"].as_i64().unwrap_or(0)).sum();
    result.value = Some(total as f64);
    result.note = Some(format!("{capa} NCRs escalated to CAPA"));
    result.breakdown = rows
        .iter()
        .map(|r| {
            json!({
                "disposition": r["disposition"].as_str(),
                "count": r["n"].as_i64(),
                "capa": r["capa"].as_i64(),
            })
        })
        .collect();
    Ok(result)
}

fn material_genealogy(
    ctx: &Ctx,
    nodes: &BTreeMap<String, NodeRef>,
    args: &BTreeMap<String, String>,
) -> Result<ToolResult, ToolError> {
    let mut result = base_result(ctx, "material_genealogy", "rows");
    if let Some(order_id) = args.get("order_id") {
        let rows = ctx.store.query(
            "SELECT mc.material_id, mc.lot_id, mc.station_id, mc.qty, ml.supplier_id, ml.on_time \
             FROM material_consumption mc JOIN material_lot ml ON ml.lot_id = mc.lot_id \
             WHERE mc.order_id = ?1 ORDER BY mc.consumption_id",
            &[SqlValue::Text(order_id.clone())],
        )?;
        if rows.is_empty() {
            return Ok(result.empty_marker());
        }
        result.value = Some(rows.len() as f64);
        result.breakdown = rows
            .iter()
            .map(|r| {
                json!({
                    "material": r["material_id"].as_str(),
                    "lot": r["lot_id"].as_str(),
                    "station": r["station_id"].as_str(),
                    "qty": r["qty"].as_f64(),
                    "supplier": r["supplier_id"].as_str(),
                    "delivered_on_time": r["on_time"].as_i64() == Some(1),
                })
            })
            .collect();
        return Ok(result);
    }
    if let Some(node) = nodes.get("material_id") {
        let rows = ctx.store.query(
            "SELECT order_id, COUNT(*) AS uses, SUM(qty) AS total_qty \
             FROM material_consumption WHERE material_id = ?1 \
             GROUP BY order_id ORDER BY order_id",
            &[SqlValue::Text(node.id.clone())],
        )?;
        if rows.is_empty() {
            return Ok(result.empty_marker());
        }
        result.value = Some(rows.len() as f64);
        result.breakdown = rows
            .iter()
            .map(|r| {
                json!({
                    "order": r["order_id"].as_str(),
                    "uses": r["uses"].as_i64(),
                    "total_qty": r["total_qty"].as_f64(),
                })
            })
            .collect();
        return Ok(result);
    }
    Err(ToolError::MissingParameter {
        tool: "material_genealogy".into(),
        name: "order_id or material_id".into(),
    })
}

fn supplier_performance(ctx: &Ctx, nodes: &BTreeMap<String, NodeRef>) -> Result<ToolResult, ToolError> {
    let supplier = &nodes["supplier_id"].id;
    let lots = ctx.store.query(
        "SELECT COUNT(*) AS lots, AVG(on_time) AS otr, AVG(lead_time_days) AS lead \
         FROM material_lot WHERE supplier_id = ?1",
        &[SqlValue::Text(supplier.clone())],
    )?;
    let mut result = base_result(ctx, "supplier_on_time_rate", "ratio");
    if lots[0]["lots"].as_i64().unwrap_or(0) == 0 {
        return Ok(result.empty_marker());
    }
    result.value = lots[0]["otr"].as_f64();
    result.note = Some(format!(
        "{} lots received; avg lead time {:.1} days",
        lots[0]["lots"].as_i64().unwrap_or(0),
        lots[0]["lead"].as_f64().unwrap_or(0.0)
    ));

    let mut params = vec![SqlValue::Text(supplier.clone())];
    let date = ctx.date_filter("date_key", &mut params);
    let consumption = ctx.store.query(
        &format!(
            "SELECT material_key, COUNT(*) AS draws, SUM(qty) AS qty \
             FROM fact_material_consumption WHERE supplier_key = ?1{date} \
             GROUP BY material_key ORDER BY material_key"
        ),
        &params,
    )?;
    result.breakdown = consumption
        .iter()
        .map(|r| {
            json!({
                "material": r["material_key"].as_str(),
                "draws": r["draws"].as_i64(),
                "qty_consumed": r["qty"].as_f64(),
            })
        })
        .collect();
    Ok(result)
}

fn change_impact(ctx: &Ctx, nodes: &BTreeMap<String, NodeRef>) -> Result<ToolResult, ToolError> {
    let mut params: Vec<SqlValue> = Vec::new();
    let station = station_filter(nodes, "station_key", &mut params);
    let date = ctx.date_filter("created_date_key", &mut params);
    let rows = ctx.store.query(
        &format!(
            "SELECT package_id, kind, status, created_date_key, station_key \
             FROM fact_change_package WHERE 1=1{station}{date} \
             ORDER BY created_date_key, package_id, station_key"
        ),
        &params,
    )?;
    let mut result = base_result(ctx, "changes_affecting_scope", "count");
    if rows.is_empty() {
        return Ok(result.empty_marker());
    }
    let mut distinct: Vec<&str> = rows.iter().filter_map(|r| r["package_id"].as_str()).collect();
    distinct.dedup();
    let distinct: std::collections::BTreeSet<&str> = distinct.into_iter().collect();
    result.value = Some(distinct.len() as f64);
    result.breakdown = rows
        .iter()
        .map(|r| {
            json!({
                "change": r["package_id"].as_str(),
                "kind": r["kind"].as_str(),
                "status": r["status"].as_str(),
                "date": r["created_date_key"].as_str(),
                "station": r["station_key"].as_str(),
            })
        })
        .collect();
    Ok(result)
}

fn change_velocity(ctx: &Ctx, nodes: &BTreeMap<String, NodeRef>) -> Result<ToolResult, ToolError> {
    let mut params: Vec<SqlValue> = Vec::new();
    let station = station_filter(nodes, "f.station_key", &mut params);
    let date = ctx.date_filter("f.created_date_key", &mut params);
    let rows = ctx.store.query(
        &format!(
            "SELECT d.iso_week AS week, COUNT(DISTINCT f.package_id) AS changes \
             FROM fact_change_package f JOIN dim_date d ON d.date_key = f.created_date_key \
             WHERE 1=1{station}{date} GROUP BY d.iso_week ORDER BY d.iso_week"
        ),
        &params,
    )?;
    let mut result = base_result(ctx, "changes_per_week", "count/week");
    if rows.is_empty() {
        return Ok(result.empty_marker());
    }
    let total: i64 = rows.iter().map(|r| r["changes"].as_i64().unwrap_or(0)).sum();
    result.value = Some(total as f64 / rows.len() as f64);
    result.note = Some(format!("{total} changes across {} weeks", rows.len()));
    result.breakdown = rows
        .iter()
        .map(|r| json!({"week": r["week"].as_str(), "changes": r["changes"].as_i64()}))
        .collect();
    Ok(result)
}

fn equipment_downtime(ctx: &Ctx, nodes: &BTreeMap<String, NodeRef>) -> Result<ToolResult, ToolError> {
    let mut params: Vec<SqlValue> = Vec::new();
    let station = station_filter(nodes, "station_key", &mut params);
    let date = ctx.date_filter("date_key", &mut params);
    let rows = ctx.store.query(
        &format!(
            "SELECT equipment_key, COUNT(*) AS events, SUM(duration_min) AS minutes \
             FROM fact_equipment_downtime WHERE 1=1{station}{date} \
             GROUP BY equipment_key ORDER BY minutes DESC, equipment_key ASC"
        ),
        &params,
    )?;
    let mut result = base_result(ctx, "downtime_minutes", "min");
    if rows.is_empty() {
        return Ok(result.empty_marker());
    }
    let minutes: i64 = rows.iter().map(|r| r["minutes"].as_i64().unwrap_or(0)).sum();
    let events: i64 = rows.iter().map(|r| r["events"].as_i64().unwrap_or(0)).sum();
    result.value = Some(minutes as f64);
    result.note = Some(format!("{events} downtime events"));
    result.breakdown = rows
        .iter()
        .map(|r| {
            json!({
                "equipment": r["equipment_key"].as_str(),
                "events": r["events"].as_i64(),
                "minutes": r["minutes"].as_i64(),
            })
        })
        .collect();
    Ok(result)
}

fn production_status(ctx: &Ctx, nodes: &BTreeMap<String, NodeRef>) -> Result<ToolResult, ToolError> {
    let mut params: Vec<SqlValue> = Vec::new();
    let date = ctx.date_filter("created_date_key", &mut params);
    let orders = ctx.store.query(
        &format!(
            "SELECT status, COUNT(*) AS n FROM fact_work_order WHERE 1=1{date} \
             GROUP BY status ORDER BY status"
        ),
        &params,
    )?;
    let mut result = base_result(ctx, "orders_in_scope", "count");
    if orders.is_empty() {
        return Ok(result.empty_marker());
    }
    let total: i64 = orders.iter().map(|r| r["n"].as_i64().unwrap_or(0)).sum();
    result.value = Some(total as f64);

    let mut params: Vec<SqlValue> = Vec::new();
    let station = station_filter(nodes, "o.station_id", &mut params);
    let wip = ctx.store.query(
        &format!(
            "SELECT o.station_id AS station, \
             SUM(CASE WHEN o.status IN ('Pending', 'Running', 'AwaitingInspection') THEN 1 ELSE 0 END) AS wip, \
             SUM(CASE WHEN o.status = 'Passed' THEN 1 ELSE 0 END) AS completed \
             FROM operation o WHERE 1=1{station} \
             GROUP BY o.station_id ORDER BY o.station_id"
        ),
        &params,
    )?;
    let status_rows: Vec<Value> = orders
        .iter()
        .map(|r| json!({"order_status": r["status"].as_str(), "count": r["n"].as_i64()}))
        .collect();
    let wip_rows: Vec<Value> = wip
        .iter()
        .map(|r| {
            json!({
                "station": r["station"].as_str(),
                "wip": r["wip"].as_i64(),
                "completed_ops": r["completed"].as_i64(),
            })
        })
        .collect();
    result.breakdown = status_rows.into_iter().chain(wip_rows).collect();
    result.note = Some("order status counts followed by per-station WIP".into());
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::builtin_snapshot;
    use crate::sim::{run_simulation, DisruptionProfile};
    use crate::tools::{project_schemas, ConstraintMode};
    use crate::warehouse::{build_schema, ingest, refresh_star, SqliteStore};
    use std::sync::{Arc, OnceLock};

    struct Fixture {
        snap: crate::ontology::OntologySnapshot,
        store: Arc<SqliteStore>,
        specs: Vec<ToolSpec>,
    }

    fn fixture() -> &'static Fixture {
        static FIXTURE: OnceLock<Fixture> = OnceLock::new();
        FIXTURE.get_or_init(|| {
            let snap = builtin_snapshot("aerospace").unwrap();
            let store = SqliteStore::in_memory().unwrap();
            build_schema(&snap, &store).unwrap();
            let log = run_simulation(&snap, 42, 30, &DisruptionProfile::stable());
            ingest(&log, &store).unwrap();
            refresh_star(&store).unwrap();
            let specs = project_schemas(&snap, ConstraintMode::Constrained);
            Fixture { snap, store: Arc::new(store), specs }
        })
    }

    fn spec<'a>(f: &'a Fixture, name: &str) -> &'a ToolSpec {
        f.specs.iter().find(|s| s.name == name).unwrap()
    }

    fn args(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn cycle_time_for_bonding_stays_within_the_configured_range() {
        let f = fixture();
        let out = invoke(spec(f, "cycle_time"), &args(&[("station_id", "S4")]), &f.snap, &*f.store).unwrap();
        let result = &out.result;
        assert_eq!(result["station"], "S4");
        assert_eq!(result["metric"], "cycle_time_avg");
        assert_eq!(result["unit"], "min");
        assert_eq!(result["period"], "full-horizon");
        assert_eq!(result["empty"], false);
        let avg = result["value"].as_f64().unwrap();
        // Configured range 120..480 with 10% multiplicative variance.
        assert!(avg > 120.0 * 0.85 && avg < 480.0 * 1.15, "{avg}");
        assert!(!result["breakdown"].as_array().unwrap().is_empty());
        assert_eq!(out.snapshot_version, f.snap.version_id());
        let ctx = out.context.as_ref().unwrap();
        assert_eq!(ctx.node.id, "S4");
        assert!(ctx.join_hints.iter().any(|t| t == "fact_operation_execution"));
    }

    #[test]
    fn fabricated_station_is_rejected_before_storage() {
        let f = fixture();
        let before = f.store.op_count();
        let err = invoke(spec(f, "cycle_time"), &args(&[("station_id", "BOND-1")]), &f.snap, &*f.store)
            .unwrap_err();
        assert_eq!(f.store.op_count(), before, "storage must not see the rejected call");
        match err {
            ToolError::Resolution(e) => {
                assert_eq!(e.valid_set, vec!["S1", "S2", "S3", "S4", "S5", "S6"]);
                let wire = e.wire_payload();
                assert_eq!(wire["error"], "invalid_parameter");
                assert_eq!(wire["rejected"], "BOND-1");
            }
            other => panic!("expected resolution error, got {other:?}"),
        }
    }

    #[test]
    fn rejection_fires_in_unconstrained_projection_too() {
        let f = fixture();
        let specs = project_schemas(&f.snap, ConstraintMode::Unconstrained);
        let spec = specs.iter().find(|s| s.name == "cycle_time").unwrap();
        let err = invoke(spec, &args(&[("station_id", "BOND-1")]), &f.snap, &*f.store).unwrap_err();
        assert!(matches!(err, ToolError::Resolution(_)), "{err:?}");
    }

    #[test]
    fn every_tool_returns_rows_for_its_golden_arguments() {
        let f = fixture();
        let golden: Vec<(&str, Vec<(&str, &str)>)> = vec![
            ("cycle_time", vec![("station_id", "S1")]),
            ("first_pass_yield", vec![("station_id", "S2")]),
            ("oee_decomposition", vec![("station_id", "S4")]),
            ("ncr_pareto", vec![("station_id", "S4")]),
            ("spc_violation", vec![("station_id", "S1")]),
            ("quality_action", vec![("disposition", "rework")]),
            ("material_genealogy", vec![("material_id", "RM-AL7075")]),
            ("supplier_performance", vec![("supplier_id", "SUP-ALUM")]),
            ("change_impact", vec![("station_id", "S4")]),
            ("change_velocity", vec![("station_id", "S3")]),
            ("equipment_downtime", vec![("station_id", "S1")]),
            ("production_status", vec![("station_id", "S6")]),
        ];
        for (tool, a) in golden {
            let out = invoke(spec(f, tool), &args(&a), &f.snap, &*f.store)
                .unwrap_or_else(|e| panic!("{tool}: {e}"));
            assert_eq!(out.result["empty"], false, "{tool} returned empty: {}", out.result);
            assert_eq!(out.snapshot_version, f.snap.version_id(), "{tool}");
        }
    }

    #[test]
    fn period_outside_horizon_is_a_valid_empty_result() {
        let f = fixture();
        let out = invoke(
            spec(f, "cycle_time"),
            &args(&[("station_id", "S4"), ("period", "2031-W10")]),
            &f.snap,
            &*f.store,
        )
        .unwrap();
        assert_eq!(out.result["empty"], true);
        let note = out.result["note"].as_str().unwrap();
        assert!(note.contains("zero rows matched"), "{note}");
        assert!(!note.to_lowercase().contains("no issues"), "{note}");
    }

    #[test]
    fn failure_code_resolves_against_the_station_scope_when_both_given() {
        let f = fixture();
        // FC-DELAM is a real aerospace code, but belongs to S2, not S4.
        let err = invoke(
            spec(f, "ncr_pareto"),
            &args(&[("station_id", "S4"), ("failure_code", "FC-DELAM")]),
            &f.snap,
            &*f.store,
        )
        .unwrap_err();
        match err {
            ToolError::Resolution(e) => {
                assert_eq!(e.rejected_value, "FC-DELAM");
                assert_eq!(
                    e.valid_set,
                    vec!["FC-BOND-THICK", "FC-BOND-VOID", "FC-CURE-DEV", "FC-SURF-CONT"]
                );
            }
            other => panic!("expected scoped resolution error, got {other:?}"),
        }
        // Same code without a station filter resolves globally.
        let out = invoke(spec(f, "ncr_pareto"), &args(&[("failure_code", "FC-DELAM")]), &f.snap, &*f.store);
        assert!(out.is_ok());
    }

    #[test]
    fn arity_violations_are_tool_errors() {
        let f = fixture();
        assert!(matches!(
            invoke(spec(f, "cycle_time"), &args(&[]), &f.snap, &*f.store),
            Err(ToolError::MissingParameter { .. })
        ));
        assert!(matches!(
            invoke(spec(f, "cycle_time"), &args(&[("station_id", "S1"), ("speed", "11")]), &f.snap, &*f.store),
            Err(ToolError::UnknownParameter { .. })
        ));
        assert!(matches!(
            invoke(spec(f, "material_genealogy"), &args(&[]), &f.snap, &*f.store),
            Err(ToolError::MissingParameter { .. })
        ));
        assert!(matches!(
            invoke(
                spec(f, "cycle_time"),
                &args(&[("station_id", "S1"), ("period", "whenever")]),
                &f.snap,
                &*f.store
            ),
            Err(ToolError::InvalidPeriod(_))
        ));
    }

    #[test]
    fn production_status_with_no_args_covers_the_whole_line() {
        let f = fixture();
        let out = invoke(spec(f, "production_status"), &args(&[]), &f.snap, &*f.store).unwrap();
        assert!(out.context.is_none(), "line-level result carries no entity context");
        assert_eq!(out.snapshot_version, f.snap.version_id());
        let breakdown = out.result["breakdown"].as_array().unwrap();
        let stations: std::collections::BTreeSet<&str> = breakdown
            .iter()
            .filter_map(|r| r.get("station").and_then(|s| s.as_str()))
            .collect();
        assert_eq!(stations.len(), 6, "{breakdown:?}");
    }

    #[test]
    fn ncr_pareto_orders_by_descending_count_with_id_ties() {
        let f = fixture();
        let out = invoke(spec(f, "ncr_pareto"), &args(&[]), &f.snap, &*f.store).unwrap();
        let rows = out.result["breakdown"].as_array().unwrap().clone();
        assert!(rows.len() > 1);
        for pair in rows.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let (ca, cb) = (a["count"].as_i64().unwrap(), b["count"].as_i64().unwrap());
            assert!(
                ca > cb || (ca == cb && a["failure_code"].as_str() < b["failure_code"].as_str()),
                "{a} before {b}"
            );
        }
    }

    #[test]
    fn result_entity_ids_stay_within_the_snapshot() {
        let f = fixture();
        let doc = f.snap.document();
        let cases: Vec<(&str, Vec<(&str, &str)>)> = vec![
            ("ncr_pareto", vec![]),
            ("equipment_downtime", vec![]),
            ("supplier_performance", vec![("supplier_id", "SUP-FAST")]),
            ("change_impact", vec![]),
        ];
        for (tool, a) in cases {
            let out = invoke(spec(f, tool), &args(&a), &f.snap, &*f.store).unwrap();
            for row in out.result["breakdown"].as_array().unwrap() {
                if let Some(code) = row.get("failure_code").and_then(|v| v.as_str()) {
                    assert!(doc.failure_codes.contains_key(code), "{tool}: {code}");
                }
                if let Some(eq) = row.get("equipment").and_then(|v| v.as_str()) {
                    assert!(doc.equipment.contains_key(eq), "{tool}: {eq}");
                }
                if let Some(m) = row.get("material").and_then(|v| v.as_str()) {
                    assert!(doc.raw_materials.contains_key(m), "{tool}: {m}");
                }
                if let Some(s) = row.get("station").and_then(|v| v.as_str()) {
                    assert!(doc.stations.contains_key(s), "{tool}: {s}");
                }
            }
        }
    }
}
