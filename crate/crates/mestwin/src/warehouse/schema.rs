use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::contract::EntityKind;
use crate::ontology::OntologySnapshot;

use super::store::{SqlValue, StorageError, StoragePort};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TableKind {
    Operational,
    Dimension,
    Fact,
    Bridge,
}

#[derive(Debug, Clone, Serialize)]
pub struct ColumnDef {
    pub name: &'static str,
    pub sql_type: &'static str,
    pub nullable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableDef {
    pub name: &'static str,
    pub kind: TableKind,
    pub columns: Vec<ColumnDef>,
    pub primary_key: Vec<&'static str>,
}

impl TableDef {
    pub fn ddl(&self) -> String {
        let mut out = format!("CREATE TABLE {} (\n", self.name);
        for col in &self.columns {
            let null = if col.nullable { "" } else { " NOT NULL" };
            let _ = writeln!(out, "  {} {}{},", col.name, col.sql_type, null);
        }
        if self.primary_key.is_empty() {
            out.truncate(out.trim_end_matches(",\n").len());
            out.push('\n');
        } else {
            let _ = writeln!(out, "  PRIMARY KEY ({})", self.primary_key.join(", "));
        }
        out.push_str(");\n");
        out
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c.name == name)
    }
}

fn t(
    name: &'static str,
    kind: TableKind,
    pk: &[&'static str],
    cols: &[(&'static str, &'static str, bool)],
) -> TableDef {
    TableDef {
        name,
        kind,
        columns: cols
            .iter()
            .map(|(name, sql_type, nullable)| ColumnDef { name, sql_type, nullable: *nullable })
            .collect(),
        primary_key: pk.to_vec(),
    }
}

/// The full table registry: operational tables mirror the seed entities and
/// simulation transactions; the analytics layer is exactly 14 dimensions,
/// 8 facts, and 1 bridge.
pub fn table_defs() -> Vec<TableDef> {
    use TableKind::*;
    vec![
        // Reference / seed operational tables.
        t("plant", Operational, &["plant_code"], &[
            ("plant_code", "TEXT", false), ("plant_name", "TEXT", false), ("template_id", "TEXT", false)]),
        t("shift", Operational, &["shift_id"], &[
            ("shift_id", "TEXT", false), ("name", "TEXT", false),
            ("start_min", "INTEGER", false), ("end_min", "INTEGER", false)]),
        t("work_center", Operational, &["wc_id"], &[
            ("wc_id", "TEXT", false), ("units", "INTEGER", false)]),
        t("station", Operational, &["station_id"], &[
            ("station_id", "TEXT", false), ("name", "TEXT", false), ("wc_id", "TEXT", false),
            ("cycle_low", "REAL", false), ("cycle_high", "REAL", false),
            ("setup_low", "REAL", false), ("setup_high", "REAL", false),
            ("first_pass_yield", "REAL", false), ("is_quality_gate", "INTEGER", false)]),
        t("equipment", Operational, &["equipment_id"], &[
            ("equipment_id", "TEXT", false), ("name", "TEXT", false),
            ("station_id", "TEXT", false), ("status", "TEXT", false)]),
        t("operator", Operational, &["operator_id"], &[
            ("operator_id", "TEXT", false), ("name", "TEXT", false), ("shift_id", "TEXT", false)]),
        t("operator_certification", Operational, &["operator_id", "cert_id"], &[
            ("operator_id", "TEXT", false), ("cert_id", "TEXT", false)]),
        t("operator_skill", Operational, &["operator_id", "skill_id"], &[
            ("operator_id", "TEXT", false), ("skill_id", "TEXT", false)]),
        t("certification", Operational, &["cert_id"], &[
            ("cert_id", "TEXT", false), ("name", "TEXT", false)]),
        t("skill", Operational, &["skill_id"], &[
            ("skill_id", "TEXT", false), ("name", "TEXT", false)]),
        t("product", Operational, &["product_id"], &[
            ("product_id", "TEXT", false), ("name", "TEXT", false), ("daily_volume", "REAL", false)]),
        t("raw_material", Operational, &["material_id"], &[
            ("material_id", "TEXT", false), ("name", "TEXT", false),
            ("unit", "TEXT", false), ("supplier_id", "TEXT", false)]),
        t("finished_material", Operational, &["material_id"], &[
            ("material_id", "TEXT", false), ("name", "TEXT", false), ("product_id", "TEXT", false)]),
        t("supplier", Operational, &["supplier_id"], &[
            ("supplier_id", "TEXT", false), ("name", "TEXT", false), ("country", "TEXT", false),
            ("lead_low", "INTEGER", false), ("lead_high", "INTEGER", false), ("on_time_rate", "REAL", false)]),
        t("supplier_material", Operational, &["supplier_id", "material_id"], &[
            ("supplier_id", "TEXT", false), ("material_id", "TEXT", false)]),
        t("bom_header", Operational, &["bom_id"], &[
            ("bom_id", "TEXT", false), ("product_id", "TEXT", false), ("revision", "TEXT", false)]),
        t("bom_line", Operational, &["bom_id", "line_no"], &[
            ("bom_id", "TEXT", false), ("line_no", "INTEGER", false),
            ("material_id", "TEXT", false), ("station_id", "TEXT", true)]),
        t("process_plan", Operational, &["plan_id"], &[
            ("plan_id", "TEXT", false), ("product_id", "TEXT", false), ("revision", "TEXT", false)]),
        t("process_plan_step", Operational, &["plan_id", "seq"], &[
            ("plan_id", "TEXT", false), ("seq", "INTEGER", false),
            ("station_id", "TEXT", false), ("step_template_id", "TEXT", false)]),
        t("inspection_plan", Operational, &["plan_id"], &[
            ("plan_id", "TEXT", false), ("name", "TEXT", false), ("sample_size", "INTEGER", false)]),
        t("inspection_characteristic", Operational, &["plan_id", "char_no"], &[
            ("plan_id", "TEXT", false), ("char_no", "INTEGER", false), ("name", "TEXT", false),
            ("target", "REAL", false), ("lsl", "REAL", false), ("usl", "REAL", false), ("unit", "TEXT", false)]),
        t("station_inspection_plan", Operational, &["station_id"], &[
            ("station_id", "TEXT", false), ("plan_id", "TEXT", false)]),
        t("failure_code", Operational, &["code"], &[
            ("code", "TEXT", false), ("description", "TEXT", false), ("severity", "TEXT", false)]),
        t("station_failure_code", Operational, &["station_id", "code"], &[
            ("station_id", "TEXT", false), ("code", "TEXT", false)]),
        t("tool_definition", Operational, &["tool_def_id"], &[
            ("tool_def_id", "TEXT", false), ("name", "TEXT", false), ("calibration_interval_days", "INTEGER", false)]),
        t("station_tool", Operational, &["station_id", "tool_def_id"], &[
            ("station_id", "TEXT", false), ("tool_def_id", "TEXT", false)]),
        t("tool_instance", Operational, &["tool_instance_id"], &[
            ("tool_instance_id", "TEXT", false), ("tool_def_id", "TEXT", false),
            ("station_id", "TEXT", false), ("calibration_due", "TEXT", false)]),
        t("step_template", Operational, &["step_id"], &[
            ("step_id", "TEXT", false), ("name", "TEXT", false), ("instruction", "TEXT", false)]),
        t("material_lot", Operational, &["lot_id"], &[
            ("lot_id", "TEXT", false), ("material_id", "TEXT", false), ("supplier_id", "TEXT", false),
            ("qty", "REAL", false), ("received_date", "TEXT", false),
            ("lead_time_days", "INTEGER", false), ("on_time", "INTEGER", false)]),
        t("storage_location", Operational, &["location_id"], &[
            ("location_id", "TEXT", false), ("zone", "TEXT", false), ("capacity", "INTEGER", false)]),
        t("ncr_disposition", Operational, &["disposition_id"], &[
            ("disposition_id", "TEXT", false), ("description", "TEXT", false), ("weight", "REAL", false)]),
        t("shift_operator", Operational, &["shift_id", "operator_id"], &[
            ("shift_id", "TEXT", false), ("operator_id", "TEXT", false)]),
        t("regulatory_standard", Operational, &["station_id", "standard"], &[
            ("station_id", "TEXT", false), ("standard", "TEXT", false)]),
        t("entity_alias", Operational, &["alias"], &[
            ("alias", "TEXT", false), ("kind", "TEXT", false), ("entity_id", "TEXT", false)]),
        t("calendar_day", Operational, &["date"], &[
            ("date", "TEXT", false), ("day_of_week", "TEXT", false),
            ("is_operating", "INTEGER", false), ("iso_week", "TEXT", false)]),
        // Transactional operational tables.
        t("work_order", Operational, &["order_id"], &[
            ("order_id", "TEXT", false), ("product_id", "TEXT", false), ("quantity", "INTEGER", false),
            ("created_at", "TEXT", false), ("due_at", "TEXT", false),
            ("status", "TEXT", false), ("expedited", "INTEGER", false), ("outcome", "TEXT", true)]),
        t("operation", Operational, &["operation_id"], &[
            ("operation_id", "TEXT", false), ("order_id", "TEXT", false), ("station_id", "TEXT", false),
            ("seq", "INTEGER", false), ("status", "TEXT", false), ("created_at", "TEXT", false),
            ("start_at", "TEXT", true), ("end_at", "TEXT", true), ("inspected_at", "TEXT", true),
            ("setup_min", "REAL", true), ("cycle_min", "REAL", true),
            ("operator_id", "TEXT", true), ("equipment_id", "TEXT", true), ("rework_of", "TEXT", true)]),
        t("operation_status_history", Operational, &[], &[
            ("operation_id", "TEXT", false), ("status", "TEXT", false), ("at", "TEXT", false)]),
        t("inspection_result", Operational, &["operation_id"], &[
            ("operation_id", "TEXT", false), ("station_id", "TEXT", false),
            ("result", "TEXT", false), ("at", "TEXT", false), ("failure_code", "TEXT", true)]),
        t("spc_sample", Operational, &["sample_id"], &[
            ("sample_id", "TEXT", false), ("operation_id", "TEXT", false), ("station_id", "TEXT", false),
            ("characteristic", "TEXT", false), ("value", "REAL", false),
            ("lsl", "REAL", false), ("usl", "REAL", false), ("in_control", "INTEGER", false), ("at", "TEXT", false)]),
        t("material_consumption", Operational, &["consumption_id"], &[
            ("consumption_id", "TEXT", false), ("operation_id", "TEXT", false), ("order_id", "TEXT", false),
            ("station_id", "TEXT", false), ("material_id", "TEXT", false), ("lot_id", "TEXT", false),
            ("qty", "REAL", false), ("at", "TEXT", false)]),
        t("ncr", Operational, &["ncr_id"], &[
            ("ncr_id", "TEXT", false), ("operation_id", "TEXT", false), ("order_id", "TEXT", false),
            ("station_id", "TEXT", false), ("failure_code", "TEXT", false), ("severity", "TEXT", false),
            ("disposition", "TEXT", true), ("capa_flag", "INTEGER", false),
            ("status", "TEXT", false), ("created_at", "TEXT", false)]),
        t("ncr_status_history", Operational, &[], &[
            ("ncr_id", "TEXT", false), ("status", "TEXT", false), ("at", "TEXT", false)]),
        t("equipment_downtime", Operational, &["downtime_id"], &[
            ("downtime_id", "TEXT", false), ("equipment_id", "TEXT", false), ("station_id", "TEXT", false),
            ("start_at", "TEXT", false), ("end_at", "TEXT", true),
            ("duration_min", "INTEGER", true), ("reason", "TEXT", false)]),
        t("supply_delay", Operational, &["delay_id"], &[
            ("delay_id", "TEXT", false), ("operation_id", "TEXT", false), ("station_id", "TEXT", false),
            ("start_at", "TEXT", false), ("until_at", "TEXT", false)]),
        t("bop_revision", Operational, &["revision_id"], &[
            ("revision_id", "TEXT", false), ("product_id", "TEXT", false), ("plan_id", "TEXT", false),
            ("revision_no", "INTEGER", false), ("at", "TEXT", false)]),
        t("bop_revision_step", Operational, &["revision_id", "station_id"], &[
            ("revision_id", "TEXT", false), ("station_id", "TEXT", false), ("step_template_id", "TEXT", false)]),
        t("change_package", Operational, &["package_id"], &[
            ("package_id", "TEXT", false), ("title", "TEXT", false), ("status", "TEXT", false),
            ("created_at", "TEXT", false), ("approved_at", "TEXT", true)]),
        t("change_package_station", Operational, &["package_id", "station_id"], &[
            ("package_id", "TEXT", false), ("station_id", "TEXT", false)]),
        // Star schema: 14 dimensions.
        t("dim_date", Dimension, &["date_key"], &[
            ("date_key", "TEXT", false), ("day_of_week", "TEXT", false),
            ("is_operating", "INTEGER", false), ("iso_week", "TEXT", false)]),
        t("dim_shift", Dimension, &["shift_key"], &[
            ("shift_key", "TEXT", false), ("name", "TEXT", false),
            ("start_min", "INTEGER", false), ("end_min", "INTEGER", false)]),
        t("dim_station", Dimension, &["station_key"], &[
            ("station_key", "TEXT", false), ("name", "TEXT", false), ("work_center", "TEXT", false),
            ("is_quality_gate", "INTEGER", false), ("fpy_target", "REAL", false)]),
        t("dim_work_center", Dimension, &["wc_key"], &[
            ("wc_key", "TEXT", false), ("units", "INTEGER", false)]),
        t("dim_equipment", Dimension, &["equipment_key"], &[
            ("equipment_key", "TEXT", false), ("name", "TEXT", false), ("station_key", "TEXT", false)]),
        t("dim_operator", Dimension, &["operator_key"], &[
            ("operator_key", "TEXT", false), ("name", "TEXT", false), ("shift_key", "TEXT", false)]),
        t("dim_product", Dimension, &["product_key"], &[
            ("product_key", "TEXT", false), ("name", "TEXT", false), ("daily_volume", "REAL", false)]),
        t("dim_raw_material", Dimension, &["material_key"], &[
            ("material_key", "TEXT", false), ("name", "TEXT", false),
            ("unit", "TEXT", false), ("supplier_key", "TEXT", false)]),
        t("dim_finished_material", Dimension, &["material_key"], &[
            ("material_key", "TEXT", false), ("name", "TEXT", false), ("product_key", "TEXT", false)]),
        t("dim_supplier", Dimension, &["supplier_key"], &[
            ("supplier_key", "TEXT", false), ("name", "TEXT", false),
            ("country", "TEXT", false), ("on_time_rate", "REAL", false)]),
        t("dim_failure_code", Dimension, &["failure_code_key"], &[
            ("failure_code_key", "TEXT", false), ("description", "TEXT", false), ("severity", "TEXT", false)]),
        t("dim_inspection_plan", Dimension, &["plan_key"], &[
            ("plan_key", "TEXT", false), ("name", "TEXT", false), ("sample_size", "INTEGER", false)]),
        t("dim_certification", Dimension, &["cert_key"], &[
            ("cert_key", "TEXT", false), ("name", "TEXT", false)]),
        t("dim_tool", Dimension, &["tool_key"], &[
            ("tool_key", "TEXT", false), ("name", "TEXT", false), ("calibration_interval_days", "INTEGER", false)]),
        // Star schema: 8 facts.
        t("fact_operation_execution", Fact, &["operation_id"], &[
            ("operation_id", "TEXT", false), ("order_id", "TEXT", false), ("date_key", "TEXT", false),
            ("station_key", "TEXT", false), ("product_key", "TEXT", false),
            ("operator_key", "TEXT", true), ("equipment_key", "TEXT", true), ("shift_key", "TEXT", true),
            ("setup_min", "REAL", false), ("cycle_min", "REAL", false), ("total_min", "REAL", false),
            ("passed", "INTEGER", false), ("ncr_flag", "INTEGER", false)]),
        t("fact_work_order", Fact, &["order_id"], &[
            ("order_id", "TEXT", false), ("product_key", "TEXT", false),
            ("created_date_key", "TEXT", false), ("due_date_key", "TEXT", false),
            ("status", "TEXT", false), ("expedited", "INTEGER", false), ("quantity", "INTEGER", false)]),
        t("fact_ncr", Fact, &["ncr_id"], &[
            ("ncr_id", "TEXT", false), ("operation_id", "TEXT", false), ("date_key", "TEXT", false),
            ("station_key", "TEXT", false), ("failure_code_key", "TEXT", false),
            ("disposition", "TEXT", false), ("capa_flag", "INTEGER", false), ("severity", "TEXT", false)]),
        t("fact_inspection_result", Fact, &["operation_id"], &[
            ("operation_id", "TEXT", false), ("date_key", "TEXT", false), ("station_key", "TEXT", false),
            ("result", "TEXT", false), ("failure_code_key", "TEXT", true)]),
        t("fact_equipment_downtime", Fact, &["downtime_id"], &[
            ("downtime_id", "TEXT", false), ("date_key", "TEXT", false), ("station_key", "TEXT", false),
            ("equipment_key", "TEXT", false), ("duration_min", "INTEGER", false), ("reason", "TEXT", false)]),
        t("fact_material_consumption", Fact, &["consumption_id"], &[
            ("consumption_id", "TEXT", false), ("date_key", "TEXT", false), ("station_key", "TEXT", false),
            ("material_key", "TEXT", false), ("supplier_key", "TEXT", false),
            ("lot_id", "TEXT", false), ("qty", "REAL", false)]),
        t("fact_change_package", Fact, &["change_key"], &[
            ("change_key", "TEXT", false), ("package_id", "TEXT", false), ("station_key", "TEXT", false),
            ("created_date_key", "TEXT", false), ("status", "TEXT", false), ("kind", "TEXT", false)]),
        t("fact_spc_sample", Fact, &["sample_id"], &[
            ("sample_id", "TEXT", false), ("date_key", "TEXT", false), ("station_key", "TEXT", false),
            ("characteristic", "TEXT", false), ("value", "REAL", false),
            ("lsl", "REAL", false), ("usl", "REAL", false), ("in_control", "INTEGER", false)]),
        // Bridge.
        t("bridge_operator_certification", Bridge, &["operator_key", "cert_key"], &[
            ("operator_key", "TEXT", false), ("cert_key", "TEXT", false)]),
    ]
}

/// Fact tables a query about this entity kind should join against. This is
/// the concrete carrier behind a context's `join_hints`.
pub fn fact_tables_for(kind: EntityKind) -> &'static [&'static str] {
    match kind {
        EntityKind::Station => &[
            "fact_operation_execution",
            "fact_inspection_result",
            "fact_ncr",
            "fact_spc_sample",
            "fact_equipment_downtime",
            "fact_change_package",
        ],
        EntityKind::WorkCenter => &["fact_operation_execution", "fact_equipment_downtime"],
        EntityKind::Equipment => &["fact_equipment_downtime", "fact_operation_execution"],
        EntityKind::Product => &["fact_work_order", "fact_operation_execution", "fact_material_consumption"],
        EntityKind::RawMaterial => &["fact_material_consumption"],
        EntityKind::FinishedMaterial => &["fact_work_order"],
        EntityKind::Supplier => &["fact_material_consumption"],
        EntityKind::FailureCode => &["fact_ncr", "fact_inspection_result"],
        EntityKind::Certification => &["bridge_operator_certification", "fact_operation_execution"],
        EntityKind::Skill => &["fact_operation_execution"],
        EntityKind::ToolDefinition => &["fact_operation_execution"],
        EntityKind::InspectionPlan => &["fact_inspection_result", "fact_spc_sample"],
        EntityKind::NcrDisposition => &["fact_ncr"],
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TableInfo {
    pub name: String,
    pub kind: TableKind,
    pub columns: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemaManifest {
    pub template_id: String,
    pub snapshot_version: String,
    pub tables: Vec<TableInfo>,
    pub operational_tables: usize,
    pub dimension_tables: usize,
    pub fact_tables: usize,
    pub bridge_tables: usize,
    pub dimension_rows: BTreeMap<String, u64>,
}

/// Create every table and pre-populate the dimensions the snapshot already
/// knows (stations, products, failure codes, suppliers, certifications, …).
/// Date, equipment, and operator dimensions fill in from operational rows at
/// star refresh.
pub fn build_schema(
    snap: &OntologySnapshot,
    store: &dyn StoragePort,
) -> Result<SchemaManifest, StorageError> {
    let defs = table_defs();
    let mut ddl = String::new();
    for def in &defs {
        ddl.push_str(&def.ddl());
    }
    store.execute_batch(&ddl)?;
    preload_dimensions(snap, store)?;

    let mut dimension_rows = BTreeMap::new();
    for def in defs.iter().filter(|d| d.kind == TableKind::Dimension) {
        dimension_rows.insert(def.name.to_string(), super::store::count_rows(store, def.name)?);
    }
    Ok(SchemaManifest {
        template_id: snap.template_id().to_string(),
        snapshot_version: snap.version_id().to_string(),
        tables: defs
            .iter()
            .map(|d| TableInfo { name: d.name.to_string(), kind: d.kind, columns: d.columns.len() })
            .collect(),
        operational_tables: defs.iter().filter(|d| d.kind == TableKind::Operational).count(),
        dimension_tables: defs.iter().filter(|d| d.kind == TableKind::Dimension).count(),
        fact_tables: defs.iter().filter(|d| d.kind == TableKind::Fact).count(),
        bridge_tables: defs.iter().filter(|d| d.kind == TableKind::Bridge).count(),
        dimension_rows,
    })
}

/// Plain-SQL DDL text for inspection.
pub fn ddl_text() -> String {
    table_defs().iter().map(TableDef::ddl).collect()
}

fn preload_dimensions(snap: &OntologySnapshot, store: &dyn StoragePort) -> Result<(), StorageError> {
    let doc = snap.document();
    for s in &doc.shifts {
        store.execute(
            "INSERT INTO dim_shift (shift_key, name, start_min, end_min) VALUES (?1, ?2, ?3, ?4)",
            &[
                SqlValue::Text(s.shift_id.clone()),
                SqlValue::Text(s.name.clone()),
                SqlValue::Int(i64::from(s.start_min)),
                SqlValue::Int(i64::from(s.end_min)),
            ],
        )?;
    }
    for (id, s) in &doc.stations {
        store.execute(
            "INSERT INTO dim_station (station_key, name, work_center, is_quality_gate, fpy_target) \
             VALUES (?1, ?2, ?3, ?4, ?5)",
            &[
                SqlValue::Text(id.clone()),
                SqlValue::Text(s.name.clone()),
                SqlValue::Text(s.work_center.clone()),
                SqlValue::Int(i64::from(s.is_quality_gate)),
                SqlValue::Real(s.first_pass_yield),
            ],
        )?;
    }
    for (id, units) in &doc.work_center_units {
        store.execute(
            "INSERT INTO dim_work_center (wc_key, units) VALUES (?1, ?2)",
            &[SqlValue::Text(id.clone()), SqlValue::Int(i64::from(*units))],
        )?;
    }
    for (id, p) in &doc.products {
        store.execute(
            "INSERT INTO dim_product (product_key, name, daily_volume) VALUES (?1, ?2, ?3)",
            &[SqlValue::Text(id.clone()), SqlValue::Text(p.name.clone()), SqlValue::Real(p.daily_volume)],
        )?;
    }
    for (id, m) in &doc.raw_materials {
        store.execute(
            "INSERT INTO dim_raw_material (material_key, name, unit, supplier_key) VALUES (?1, ?2, ?3, ?4)",
            &[
                SqlValue::Text(id.clone()),
                SqlValue::Text(m.name.clone()),
                SqlValue::Text(m.unit.clone()),
                SqlValue::Text(m.supplier.clone()),
            ],
        )?;
    }
    for (id, m) in &doc.finished_materials {
        store.execute(
            "INSERT INTO dim_finished_material (material_key, name, product_key) VALUES (?1, ?2, ?3)",
            &[SqlValue::Text(id.clone()), SqlValue::Text(m.name.clone()), SqlValue::Text(m.product.clone())],
        )?;
    }
    for (id, s) in &doc.suppliers {
        store.execute(
            "INSERT INTO dim_supplier (supplier_key, name, country, on_time_rate) VALUES (?1, ?2, ?3, ?4)",
            &[
                SqlValue::Text(id.clone()),
                SqlValue::Text(s.name.clone()),
                SqlValue::Text(s.country.clone()),
                SqlValue::Real(s.on_time_rate),
            ],
        )?;
    }
    for (code, fc) in &doc.failure_codes {
        store.execute(
            "INSERT INTO dim_failure_code (failure_code_key, description, severity) VALUES (?1, ?2, ?3)",
            &[
                SqlValue::Text(code.clone()),
                SqlValue::Text(fc.description.clone()),
                SqlValue::Text(fc.severity.clone()),
            ],
        )?;
    }
    for (id, plan) in &doc.inspection_plans {
        store.execute(
            "INSERT INTO dim_inspection_plan (plan_key, name, sample_size) VALUES (?1, ?2, ?3)",
            &[
                SqlValue::Text(id.clone()),
                SqlValue::Text(plan.name.clone()),
                SqlValue::Int(i64::from(plan.sample_size)),
            ],
        )?;
    }
    for (id, c) in &doc.certifications {
        store.execute(
            "INSERT INTO dim_certification (cert_key, name) VALUES (?1, ?2)",
            &[SqlValue::Text(id.clone()), SqlValue::Text(c.name.clone())],
        )?;
    }
    for (id, td) in &doc.tool_definitions {
        store.execute(
            "INSERT INTO dim_tool (tool_key, name, calibration_interval_days) VALUES (?1, ?2, ?3)",
            &[
                SqlValue::Text(id.clone()),
                SqlValue::Text(td.name.clone()),
                SqlValue::Int(i64::from(td.calibration_interval_days)),
            ],
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::builtin_snapshot;
    use crate::warehouse::SqliteStore;

    #[test]
    fn star_shape_is_14_8_1_for_every_template() {
        for template in crate::ontology::template_names() {
            let snap = builtin_snapshot(template).unwrap();
            let store = SqliteStore::in_memory().unwrap();
            let manifest = build_schema(&snap, &store).unwrap();
            assert_eq!(manifest.dimension_tables, 14, "{template}");
            assert_eq!(manifest.fact_tables, 8, "{template}");
            assert_eq!(manifest.bridge_tables, 1, "{template}");
            assert!(manifest.operational_tables >= 40, "{template}");
        }
    }

    #[test]
    fn dim_station_row_counts_follow_the_template() {
        for (template, expected) in [("aerospace", 6), ("food_beverage", 14)] {
            let snap = builtin_snapshot(template).unwrap();
            let store = SqliteStore::in_memory().unwrap();
            let manifest = build_schema(&snap, &store).unwrap();
            assert_eq!(manifest.dimension_rows["dim_station"], expected, "{template}");
        }
    }

    #[test]
    fn every_kind_has_join_hints() {
        for kind in EntityKind::ALL {
            assert!(!fact_tables_for(kind).is_empty(), "{kind:?}");
        }
    }

    #[test]
    fn ddl_is_parseable_by_the_engine() {
        let store = SqliteStore::in_memory().unwrap();
        store.execute_batch(&ddl_text()).unwrap();
    }
}
