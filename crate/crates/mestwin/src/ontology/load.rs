use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use super::document::{OntologyDocument, REQUIRED_EXPORTS};

/// A single validation finding, pointing at the export and key path at fault.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Violation {
    pub export: String,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.export, self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("parse error: {0}")]
    Parse(String),
    /// Every required export absent from the document, all at once.
    #[error("document is missing required exports: {}", .0.join(", "))]
    MissingExports(Vec<String>),
    /// Every referential / range / probability violation, all at once.
    #[error("document failed validation with {} violation(s):\n{}", .0.len(),
            .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Referential(Vec<Violation>),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Load and fully validate an ontology document from a file.
pub fn load_document(path: impl AsRef<Path>) -> Result<OntologyDocument, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_document_str(&text)
}

/// Load and fully validate an ontology document from JSON text.
///
/// Check order: JSON well-formedness, then presence of all 45 required
/// exports (reported together), then field typing, then referential and
/// range validation (reported together).
pub fn load_document_str(text: &str) -> Result<OntologyDocument, LoadError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| LoadError::Parse(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| LoadError::Parse("top level must be a JSON object".into()))?;

    let missing: Vec<String> = REQUIRED_EXPORTS
        .iter()
        .filter(|name| !obj.contains_key(**name))
        .map(|name| name.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(LoadError::MissingExports(missing));
    }

    let deser = &mut serde_json::Deserializer::from_str(text);
    let doc: OntologyDocument = serde_path_to_error::deserialize(deser)
        .map_err(|e| LoadError::Parse(format!("{} (at {})", e.inner(), e.path())))?;

    let violations = validate(&doc);
    if !violations.is_empty() {
        return Err(LoadError::Referential(violations));
    }
    Ok(doc)
}

/// Structural validation of a typed document. Returns every finding.
pub fn validate(doc: &OntologyDocument) -> Vec<Violation> {
    let mut v = Checker { out: Vec::new() };
    v.stations(doc);
    v.station_scoped_maps(doc);
    v.materials_and_products(doc);
    v.work_centers(doc);
    v.scalars(doc);
    v.calendar(doc);
    v.out
}

struct Checker {
    out: Vec<Violation>,
}

impl Checker {
    fn push(&mut self, export: &str, path: impl Into<String>, message: impl Into<String>) {
        self.out.push(Violation {
            export: export.to_string(),
            path: path.into(),
            message: message.into(),
        });
    }

    fn check_prob(&mut self, export: &str, path: &str, p: f64) {
        if !(0.0..=1.0).contains(&p) {
            self.push(export, path, format!("probability {p} outside [0, 1]"));
        }
    }

    fn check_range_f64(&mut self, export: &str, path: &str, (low, high): (f64, f64)) {
        if low > high {
            self.push(export, path, format!("range low {low} exceeds high {high}"));
        }
    }

    fn check_range_u32(&mut self, export: &str, path: &str, (low, high): (u32, u32)) {
        if low > high {
            self.push(export, path, format!("range low {low} exceeds high {high}"));
        }
    }

    fn stations(&mut self, doc: &OntologyDocument) {
        if doc.stations.is_empty() {
            self.push("STATIONS", "STATIONS", "at least one station is required");
        }
        for (id, s) in &doc.stations {
            let base = format!("STATIONS.{id}");
            if s.first_pass_yield <= 0.0 || s.first_pass_yield > 1.0 {
                self.push(
                    "STATIONS",
                    format!("{base}.first_pass_yield"),
                    format!("first_pass_yield {} outside (0, 1]", s.first_pass_yield),
                );
            }
            if s.cycle_time_range_min.0 <= 0.0 {
                self.push(
                    "STATIONS",
                    format!("{base}.cycle_time_range_min"),
                    "cycle time range must be positive",
                );
            }
            if s.setup_time_min.0 < 0.0 {
                self.push(
                    "STATIONS",
                    format!("{base}.setup_time_min"),
                    "setup time range must be non-negative",
                );
            }
            self.check_range_f64("STATIONS", &format!("{base}.cycle_time_range_min"), s.cycle_time_range_min);
            self.check_range_f64("STATIONS", &format!("{base}.setup_time_min"), s.setup_time_min);
            if !doc.work_center_units.contains_key(&s.work_center) {
                self.push(
                    "STATIONS",
                    format!("{base}.work_center"),
                    format!("references work center '{}' not present in WORK_CENTER_UNITS", s.work_center),
                );
            }
        }
    }

    /// Every map keyed by station id must only key existing stations, and the
    /// ids it references must exist in their home collection.
    fn station_scoped_maps(&mut self, doc: &OntologyDocument) {
        let station_exists = |id: &String| doc.stations.contains_key(id);

        let keyed: [(&str, Vec<&String>); 8] = [
            ("STATION_TO_WC", doc.station_to_wc.keys().collect()),
            ("STATION_FAILURE_CODES", doc.station_failure_codes.keys().collect()),
            ("STATION_CERTIFICATIONS", doc.station_certifications.keys().collect()),
            ("STATION_SKILLS", doc.station_skills.keys().collect()),
            ("STATION_TOOLS", doc.station_tools.keys().collect()),
            ("STATION_INSPECTION_PLANS", doc.station_inspection_plans.keys().collect()),
            ("OPERATION_MATERIAL_CONSUMPTION", doc.operation_material_consumption.keys().collect()),
            ("BOM_STATION_MATERIALS", doc.bom_station_materials.keys().collect()),
        ];
        for (export, keys) in keyed {
            for key in keys {
                if !station_exists(key) {
                    self.push(
                        export,
                        format!("{export}.{key}"),
                        format!("references station '{key}' not present in STATIONS"),
                    );
                }
            }
        }

        for (station, codes) in &doc.station_failure_codes {
            for code in codes {
                if !doc.failure_codes.contains_key(code) {
                    self.push(
                        "STATION_FAILURE_CODES",
                        format!("STATION_FAILURE_CODES.{station}"),
                        format!("references failure code '{code}' not present in FAILURE_CODES"),
                    );
                }
            }
        }
        for (station, certs) in &doc.station_certifications {
            for cert in certs {
                if !doc.certifications.contains_key(cert) {
                    self.push(
                        "STATION_CERTIFICATIONS",
                        format!("STATION_CERTIFICATIONS.{station}"),
                        format!("references certification '{cert}' not present in CERTIFICATIONS"),
                    );
                }
            }
        }
        for (station, skills) in &doc.station_skills {
            for skill in skills {
                if !doc.skills.contains_key(skill) {
                    self.push(
                        "STATION_SKILLS",
                        format!("STATION_SKILLS.{station}"),
                        format!("references skill '{skill}' not present in SKILLS"),
                    );
                }
            }
        }
        for (station, tools) in &doc.station_tools {
            for tool in tools {
                if !doc.tool_definitions.contains_key(tool) {
                    self.push(
                        "STATION_TOOLS",
                        format!("STATION_TOOLS.{station}"),
                        format!("references tool '{tool}' not present in TOOL_DEFINITIONS"),
                    );
                }
            }
        }
        for (station, plan) in &doc.station_inspection_plans {
            if !doc.inspection_plans.contains_key(plan) {
                self.push(
                    "STATION_INSPECTION_PLANS",
                    format!("STATION_INSPECTION_PLANS.{station}"),
                    format!("references inspection plan '{plan}' not present in INSPECTION_PLANS"),
                );
            }
        }
        for (station, draws) in &doc.operation_material_consumption {
            for d in draws {
                if !doc.raw_materials.contains_key(&d.material) {
                    self.push(
                        "OPERATION_MATERIAL_CONSUMPTION",
                        format!("OPERATION_MATERIAL_CONSUMPTION.{station}"),
                        format!("references material '{}' not present in RAW_MATERIALS", d.material),
                    );
                }
                if d.qty_per_op <= 0.0 {
                    self.push(
                        "OPERATION_MATERIAL_CONSUMPTION",
                        format!("OPERATION_MATERIAL_CONSUMPTION.{station}"),
                        format!("qty_per_op {} must be positive", d.qty_per_op),
                    );
                }
            }
        }
        for (station, mats) in &doc.bom_station_materials {
            for m in mats {
                if !doc.raw_materials.contains_key(m) {
                    self.push(
                        "BOM_STATION_MATERIALS",
                        format!("BOM_STATION_MATERIALS.{station}"),
                        format!("references material '{m}' not present in RAW_MATERIALS"),
                    );
                }
            }
        }
        for (station, standards) in &doc.station_regulatory {
            if !station_exists(station) {
                self.push(
                    "STATION_REGULATORY",
                    format!("STATION_REGULATORY.{station}"),
                    format!("references station '{station}' not present in STATIONS"),
                );
            }
            if standards.is_empty() {
                self.push(
                    "STATION_REGULATORY",
                    format!("STATION_REGULATORY.{station}"),
                    "override must list at least one standard",
                );
            }
        }

        // Completeness: the simulator needs these per station.
        for id in doc.stations.keys() {
            if !doc.station_to_wc.contains_key(id) {
                self.push("STATION_TO_WC", format!("STATION_TO_WC.{id}"), "station has no work-center mapping");
            } else if doc.station_to_wc[id] != doc.stations[id].work_center {
                self.push(
                    "STATION_TO_WC",
                    format!("STATION_TO_WC.{id}"),
                    format!(
                        "maps to '{}' but STATIONS.{id}.work_center is '{}'",
                        doc.station_to_wc[id], doc.stations[id].work_center
                    ),
                );
            }
            if doc.station_failure_codes.get(id).is_none_or(|c| c.is_empty()) {
                self.push(
                    "STATION_FAILURE_CODES",
                    format!("STATION_FAILURE_CODES.{id}"),
                    "station has no failure codes configured",
                );
            }
            if !doc.station_inspection_plans.contains_key(id) {
                self.push(
                    "STATION_INSPECTION_PLANS",
                    format!("STATION_INSPECTION_PLANS.{id}"),
                    "station has no inspection plan",
                );
            }
        }

        for (wc, station) in doc.station_to_wc.iter().filter_map(|(s, wc)| {
            (!doc.work_center_units.contains_key(wc)).then_some((wc.clone(), s.clone()))
        }) {
            self.push(
                "STATION_TO_WC",
                format!("STATION_TO_WC.{station}"),
                format!("references work center '{wc}' not present in WORK_CENTER_UNITS"),
            );
        }
    }

    fn materials_and_products(&mut self, doc: &OntologyDocument) {
        if doc.products.is_empty() {
            self.push("PRODUCTS", "PRODUCTS", "at least one product is required");
        }
        for (id, p) in &doc.products {
            if p.daily_volume < 0.0 {
                self.push("PRODUCTS", format!("PRODUCTS.{id}.daily_volume"), "daily_volume must be non-negative");
            }
        }
        for (id, m) in &doc.raw_materials {
            if !doc.suppliers.contains_key(&m.supplier) {
                self.push(
                    "RAW_MATERIALS",
                    format!("RAW_MATERIALS.{id}.supplier"),
                    format!("references supplier '{}' not present in SUPPLIERS", m.supplier),
                );
            }
        }
        for (id, m) in &doc.finished_materials {
            if !doc.products.contains_key(&m.product) {
                self.push(
                    "FINISHED_MATERIALS",
                    format!("FINISHED_MATERIALS.{id}.product"),
                    format!("references product '{}' not present in PRODUCTS", m.product),
                );
            }
        }
        for (product, mats) in &doc.product_raw_material {
            if !doc.products.contains_key(product) {
                self.push(
                    "PRODUCT_RAW_MATERIAL",
                    format!("PRODUCT_RAW_MATERIAL.{product}"),
                    format!("references product '{product}' not present in PRODUCTS"),
                );
            }
            for m in mats {
                if !doc.raw_materials.contains_key(m) {
                    self.push(
                        "PRODUCT_RAW_MATERIAL",
                        format!("PRODUCT_RAW_MATERIAL.{product}"),
                        format!("references material '{m}' not present in RAW_MATERIALS"),
                    );
                }
            }
        }
        for (product, plan) in &doc.process_plans {
            if !doc.products.contains_key(product) {
                self.push(
                    "PROCESS_PLANS",
                    format!("PROCESS_PLANS.{product}"),
                    format!("references product '{product}' not present in PRODUCTS"),
                );
            }
            if plan.is_empty() {
                self.push("PROCESS_PLANS", format!("PROCESS_PLANS.{product}"), "routing must list at least one station");
            }
            let mut seen = BTreeSet::new();
            for station in plan {
                if !doc.stations.contains_key(station) {
                    self.push(
                        "PROCESS_PLANS",
                        format!("PROCESS_PLANS.{product}"),
                        format!("references station '{station}' not present in STATIONS"),
                    );
                }
                if !seen.insert(station) {
                    self.push(
                        "PROCESS_PLANS",
                        format!("PROCESS_PLANS.{product}"),
                        format!("station '{station}' appears more than once in the routing"),
                    );
                }
            }
        }
        for id in doc.products.keys() {
            if !doc.process_plans.contains_key(id) {
                self.push("PROCESS_PLANS", format!("PROCESS_PLANS.{id}"), "product has no process plan");
            }
        }
        for (id, s) in &doc.suppliers {
            self.check_prob("SUPPLIERS", &format!("SUPPLIERS.{id}.on_time_rate"), s.on_time_rate);
            self.check_range_u32("SUPPLIERS", &format!("SUPPLIERS.{id}.lead_time_days"), s.lead_time_days);
        }
        for (id, plan) in &doc.inspection_plans {
            for (i, c) in plan.characteristics.iter().enumerate() {
                if !(c.lsl <= c.target && c.target <= c.usl) {
                    self.push(
                        "INSPECTION_PLANS",
                        format!("INSPECTION_PLANS.{id}.characteristics[{i}]"),
                        format!("limits must satisfy lsl <= target <= usl, got {} / {} / {}", c.lsl, c.target, c.usl),
                    );
                }
            }
        }
    }

    fn work_centers(&mut self, doc: &OntologyDocument) {
        for (id, e) in &doc.equipment {
            if !doc.stations.contains_key(&e.station) {
                self.push(
                    "EQUIPMENT",
                    format!("EQUIPMENT.{id}.station"),
                    format!("references station '{}' not present in STATIONS", e.station),
                );
            }
        }
        // Declared capacity must match the physical unit inventory.
        for (wc, units) in &doc.work_center_units {
            let actual = doc
                .equipment
                .values()
                .filter(|e| doc.stations.get(&e.station).map(|s| &s.work_center) == Some(wc))
                .count() as u32;
            if actual != *units {
                self.push(
                    "WORK_CENTER_UNITS",
                    format!("WORK_CENTER_UNITS.{wc}"),
                    format!("declares {units} unit(s) but EQUIPMENT lists {actual} at this work center"),
                );
            }
        }
    }

    fn scalars(&mut self, doc: &OntologyDocument) {
        self.check_prob("CAPA_TRIGGER_RATE", "CAPA_TRIGGER_RATE", doc.capa_trigger_rate);
        self.check_prob("EQUIPMENT_DOWNTIME_PROB", "EQUIPMENT_DOWNTIME_PROB", doc.equipment_downtime_prob);
        self.check_prob("ORDER_EXPEDITE_RATE", "ORDER_EXPEDITE_RATE", doc.order_expedite_rate);
        self.check_prob("CYCLE_TIME_VARIANCE", "CYCLE_TIME_VARIANCE", doc.cycle_time_variance);
        self.check_range_f64("TARGET_OEE_RANGE", "TARGET_OEE_RANGE", doc.target_oee_range);
        self.check_prob("TARGET_OEE_RANGE", "TARGET_OEE_RANGE[0]", doc.target_oee_range.0);
        self.check_prob("TARGET_OEE_RANGE", "TARGET_OEE_RANGE[1]", doc.target_oee_range.1);
        self.check_range_f64("FIRST_PASS_YIELD_RANGE", "FIRST_PASS_YIELD_RANGE", doc.first_pass_yield_range);
        self.check_prob("FIRST_PASS_YIELD_RANGE", "FIRST_PASS_YIELD_RANGE[0]", doc.first_pass_yield_range.0);
        self.check_prob("FIRST_PASS_YIELD_RANGE", "FIRST_PASS_YIELD_RANGE[1]", doc.first_pass_yield_range.1);
        self.check_range_f64("AVG_WIP_RANGE", "AVG_WIP_RANGE", doc.avg_wip_range);
        self.check_range_u32(
            "EQUIPMENT_DOWNTIME_DURATION_MIN",
            "EQUIPMENT_DOWNTIME_DURATION_MIN",
            doc.equipment_downtime_duration_min,
        );
        for (status, range) in &doc.ncr_status_durations {
            self.check_range_u32("NCR_STATUS_DURATIONS", &format!("NCR_STATUS_DURATIONS.{status}"), *range);
        }
        let params = &doc.change_package_params;
        if params.min_affected_stations > params.max_affected_stations {
            self.push(
                "CHANGE_PACKAGE_PARAMS",
                "CHANGE_PACKAGE_PARAMS",
                "min_affected_stations exceeds max_affected_stations",
            );
        }
        self.check_range_u32("CHANGE_PACKAGE_PARAMS", "CHANGE_PACKAGE_PARAMS.approval_days_range", params.approval_days_range);
        if doc.change_package_rate < 0.0 {
            self.push("CHANGE_PACKAGE_RATE", "CHANGE_PACKAGE_RATE", "rate must be non-negative");
        }
        if doc.ncr_dispositions.is_empty() {
            self.push("NCR_DISPOSITIONS", "NCR_DISPOSITIONS", "at least one disposition is required");
        }
        let weight_sum: f64 = doc.ncr_dispositions.values().map(|d| d.weight).sum();
        if weight_sum <= 0.0 {
            self.push("NCR_DISPOSITIONS", "NCR_DISPOSITIONS", "disposition weights must sum to a positive value");
        }
        for (id, d) in &doc.ncr_dispositions {
            if d.weight < 0.0 {
                self.push("NCR_DISPOSITIONS", format!("NCR_DISPOSITIONS.{id}.weight"), "weight must be non-negative");
            }
        }
        if doc.bop_revision_interval_days == 0 {
            self.push("BOP_REVISION_INTERVAL_DAYS", "BOP_REVISION_INTERVAL_DAYS", "interval must be at least one day");
        }
    }

    fn calendar(&mut self, doc: &OntologyDocument) {
        if doc.shifts.is_empty() {
            self.push("SHIFTS", "SHIFTS", "at least one shift is required");
        }
        let mut prev_end = 0;
        for (i, s) in doc.shifts.iter().enumerate() {
            let path = format!("SHIFTS[{i}]");
            if s.start_min >= s.end_min || s.end_min > 1440 {
                self.push("SHIFTS", &path, format!("shift window {}..{} is invalid", s.start_min, s.end_min));
            }
            if s.start_min < prev_end {
                self.push("SHIFTS", &path, "shifts must be listed in order and must not overlap");
            }
            prev_end = s.end_min;
            if s.end_min > s.start_min && doc.break_duration_min >= s.end_min - s.start_min {
                self.push("BREAK_DURATION_MIN", &path, "break consumes the whole shift");
            }
        }
        const DAYS: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];
        if doc.operating_days.is_empty() {
            self.push("OPERATING_DAYS", "OPERATING_DAYS", "at least one operating day is required");
        }
        let mut seen = BTreeSet::new();
        for day in &doc.operating_days {
            if !DAYS.contains(&day.as_str()) {
                self.push("OPERATING_DAYS", "OPERATING_DAYS", format!("unknown day name '{day}'"));
            }
            if !seen.insert(day) {
                self.push("OPERATING_DAYS", "OPERATING_DAYS", format!("day '{day}' listed twice"));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aerospace_value() -> Value {
        serde_json::from_str(crate::ontology::template_source("aerospace").unwrap()).unwrap()
    }

    #[test]
    fn missing_single_export_is_named_exactly() {
        let mut value = aerospace_value();
        value.as_object_mut().unwrap().remove("STATIONS");
        let err = load_document_str(&value.to_string()).unwrap_err();
        match err {
            LoadError::MissingExports(names) => assert_eq!(names, vec!["STATIONS".to_string()]),
            other => panic!("expected MissingExports, got {other:?}"),
        }
    }

    #[test]
    fn missing_exports_are_reported_together() {
        let mut value = aerospace_value();
        let obj = value.as_object_mut().unwrap();
        obj.remove("SKILLS");
        obj.remove("PRODUCTS");
        let err = load_document_str(&value.to_string()).unwrap_err();
        match err {
            LoadError::MissingExports(names) => {
                assert_eq!(names, vec!["PRODUCTS".to_string(), "SKILLS".to_string()])
            }
            other => panic!("expected MissingExports, got {other:?}"),
        }
    }

    #[test]
    fn unknown_station_reference_is_a_referential_violation() {
        let mut value = aerospace_value();
        value["STATION_FAILURE_CODES"]["S9"] = serde_json::json!(["FC-BOND-VOID"]);
        let err = load_document_str(&value.to_string()).unwrap_err();
        match err {
            LoadError::Referential(violations) => {
                assert!(violations.iter().any(|v| v.path == "STATION_FAILURE_CODES.S9"
                    && v.message.contains("'S9'")));
            }
            other => panic!("expected Referential, got {other:?}"),
        }
    }

    #[test]
    fn violations_are_collected_not_first_failure() {
        let mut value = aerospace_value();
        value["STATION_FAILURE_CODES"]["S9"] = serde_json::json!(["FC-BOND-VOID"]);
        value["CAPA_TRIGGER_RATE"] = serde_json::json!(1.7);
        let err = load_document_str(&value.to_string()).unwrap_err();
        match err {
            LoadError::Referential(violations) => {
                assert!(violations.len() >= 2, "got {violations:?}");
            }
            other => panic!("expected Referential, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(load_document_str("{"), Err(LoadError::Parse(_))));
    }

    #[test]
    fn type_error_reports_the_key_path() {
        let mut value = aerospace_value();
        value["STATIONS"]["S1"]["first_pass_yield"] = serde_json::json!("high");
        let err = load_document_str(&value.to_string()).unwrap_err();
        match err {
            LoadError::Parse(msg) => assert!(msg.contains("STATIONS"), "{msg}"),
            other => panic!("expected Parse, got {other:?}"),
        }
    }
}
