use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// The 45 top-level keys every ontology document must define.
///
/// Absence of any one of these is a load error, never a silent default.
pub const REQUIRED_EXPORTS: [&str; 45] = [
    "PLANT_CODE",
    "PLANT_NAME",
    "SHIFTS",
    "OPERATING_DAYS",
    "BREAK_DURATION_MIN",
    "WEEKLY_PM_HOURS",
    "TARGET_OEE_RANGE",
    "FIRST_PASS_YIELD_RANGE",
    "AVG_WIP_RANGE",
    "OPERATORS_PER_SHIFT",
    "EQUIPMENT",
    "WORK_CENTER_UNITS",
    "PRODUCTS",
    "WORKING_DAYS_PER_YEAR",
    "STATIONS",
    "STATION_TO_WC",
    "RAW_MATERIALS",
    "FINISHED_MATERIALS",
    "PRODUCT_RAW_MATERIAL",
    "OPERATION_MATERIAL_CONSUMPTION",
    "SUPPLIERS",
    "FAILURE_CODES",
    "STATION_FAILURE_CODES",
    "PROCESS_PLANS",
    "INSPECTION_PLANS",
    "STATION_INSPECTION_PLANS",
    "NCR_DISPOSITIONS",
    "NCR_STATUS_DURATIONS",
    "CAPA_TRIGGER_RATE",
    "EQUIPMENT_DOWNTIME_PROB",
    "EQUIPMENT_DOWNTIME_DURATION_MIN",
    "ORDER_EXPEDITE_RATE",
    "BOP_REVISION_INTERVAL_DAYS",
    "CYCLE_TIME_VARIANCE",
    "DEFAULT_RANDOM_SEED",
    "CERTIFICATIONS",
    "STATION_CERTIFICATIONS",
    "SKILLS",
    "STATION_SKILLS",
    "TOOL_DEFINITIONS",
    "STATION_TOOLS",
    "STEP_TEMPLATES",
    "CHANGE_PACKAGE_RATE",
    "CHANGE_PACKAGE_PARAMS",
    "BOM_STATION_MATERIALS",
];

/// One work station on the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationDef {
    pub name: String,
    pub work_center: String,
    /// Minutes, inclusive low/high for the uniform cycle-time draw.
    pub cycle_time_range_min: (f64, f64),
    pub setup_time_min: (f64, f64),
    pub first_pass_yield: f64,
    pub is_quality_gate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftDef {
    pub shift_id: String,
    pub name: String,
    /// Minutes from midnight, start inclusive, end exclusive.
    pub start_min: u32,
    pub end_min: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquipmentDef {
    pub name: String,
    pub station: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductDef {
    pub name: String,
    /// Mean orders created per operating day for this product.
    pub daily_volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMaterialDef {
    pub name: String,
    pub unit: String,
    pub supplier: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinishedMaterialDef {
    pub name: String,
    pub product: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialDraw {
    pub material: String,
    pub qty_per_op: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplierDef {
    pub name: String,
    pub country: String,
    pub lead_time_days: (u32, u32),
    pub on_time_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureCodeDef {
    pub description: String,
    pub severity: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectionCharacteristic {
    pub name: String,
    pub target: f64,
    pub lsl: f64,
    pub usl: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectionPlanDef {
    pub name: String,
    pub sample_size: u32,
    pub characteristics: Vec<InspectionCharacteristic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispositionDef {
    pub description: String,
    /// Relative draw weight when an inspection fails.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedDef {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolDef {
    pub name: String,
    pub calibration_interval_days: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTemplateDef {
    pub name: String,
    pub instruction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePackageParams {
    pub min_affected_stations: u32,
    pub max_affected_stations: u32,
    pub approval_days_range: (u32, u32),
}

/// Cross-naming-system identity declaration (optional extension data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityAlias {
    pub kind: String,
    pub id: String,
}

/// A fully parsed ontology document: one field per required export.
///
/// Collections are keyed maps from stable identifiers to records; keyed maps
/// use `BTreeMap` so iteration order (and therefore everything derived from
/// it: canonical serialization, seed generation, simulation) is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub struct OntologyDocument {
    pub plant_code: String,
    pub plant_name: String,
    pub shifts: Vec<ShiftDef>,
    /// Weekday names: Mon, Tue, Wed, Thu, Fri, Sat, Sun.
    pub operating_days: Vec<String>,
    pub break_duration_min: u32,
    pub weekly_pm_hours: u32,
    pub target_oee_range: (f64, f64),
    pub first_pass_yield_range: (f64, f64),
    pub avg_wip_range: (f64, f64),
    pub operators_per_shift: u32,
    pub equipment: BTreeMap<String, EquipmentDef>,
    pub work_center_units: BTreeMap<String, u32>,
    pub products: BTreeMap<String, ProductDef>,
    pub working_days_per_year: u32,
    pub stations: BTreeMap<String, StationDef>,
    pub station_to_wc: BTreeMap<String, String>,
    pub raw_materials: BTreeMap<String, RawMaterialDef>,
    pub finished_materials: BTreeMap<String, FinishedMaterialDef>,
    pub product_raw_material: BTreeMap<String, Vec<String>>,
    pub operation_material_consumption: BTreeMap<String, Vec<MaterialDraw>>,
    pub suppliers: BTreeMap<String, SupplierDef>,
    pub failure_codes: BTreeMap<String, FailureCodeDef>,
    pub station_failure_codes: BTreeMap<String, Vec<String>>,
    pub process_plans: BTreeMap<String, Vec<String>>,
    pub inspection_plans: BTreeMap<String, InspectionPlanDef>,
    pub station_inspection_plans: BTreeMap<String, String>,
    pub ncr_dispositions: BTreeMap<String, DispositionDef>,
    /// Minutes spent in each non-terminal NCR status, as (low, high).
    pub ncr_status_durations: BTreeMap<String, (u32, u32)>,
    pub capa_trigger_rate: f64,
    /// Per-equipment, per-productive-tick breakdown probability.
    pub equipment_downtime_prob: f64,
    pub equipment_downtime_duration_min: (u32, u32),
    pub order_expedite_rate: f64,
    pub bop_revision_interval_days: u32,
    /// Multiplicative spread applied on top of the uniform cycle draw.
    pub cycle_time_variance: f64,
    pub default_random_seed: u64,
    pub certifications: BTreeMap<String, NamedDef>,
    pub station_certifications: BTreeMap<String, Vec<String>>,
    pub skills: BTreeMap<String, NamedDef>,
    pub station_skills: BTreeMap<String, Vec<String>>,
    pub tool_definitions: BTreeMap<String, ToolDef>,
    pub station_tools: BTreeMap<String, Vec<String>>,
    pub step_templates: BTreeMap<String, StepTemplateDef>,
    /// Mean engineering-change packages opened per operating day.
    pub change_package_rate: f64,
    pub change_package_params: ChangePackageParams,
    pub bom_station_materials: BTreeMap<String, Vec<String>>,

    // Optional keys beyond the 45 required exports. They default to empty and
    // never participate in the missing-export check.
    #[serde(default)]
    pub regulatory_authority: String,
    #[serde(default)]
    pub station_regulatory: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub entity_aliases: BTreeMap<String, EntityAlias>,
}

impl OntologyDocument {
    /// Station ids in line order: numeric suffix first (S1, S2, … S10), then
    /// lexicographic for ids that do not follow the prefix+number shape.
    pub fn station_order(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.stations.keys().cloned().collect();
        ids.sort_by_key(|a| natural_key(a));
        ids
    }

    /// Total mean orders per operating day across all products.
    pub fn daily_order_target(&self) -> f64 {
        self.products.values().map(|p| p.daily_volume).sum()
    }
}

fn natural_key(id: &str) -> (String, u64, String) {
    let split = id.rfind(|c: char| !c.is_ascii_digit()).map_or(0, |i| i + 1);
    let (prefix, digits) = id.split_at(split);
    match digits.parse::<u64>() {
        Ok(n) => (prefix.to_string(), n, String::new()),
        Err(_) => (id.to_string(), 0, id.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn natural_order_handles_two_digit_suffixes() {
        let mut doc_ids = vec!["S10", "S2", "S1", "S14"];
        doc_ids.sort_by_key(|a| natural_key(a));
        assert_eq!(doc_ids, vec!["S1", "S2", "S10", "S14"]);
    }
}
