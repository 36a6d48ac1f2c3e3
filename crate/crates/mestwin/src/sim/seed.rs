use std::collections::{BTreeMap, BTreeSet};

use serde_json::json;

use crate::ontology::OntologySnapshot;

use super::calendar::{sim_epoch, FactoryCalendar};
use super::events::{CdcOp, CdcRecord};
use super::rng::{stream, uniform_f64, uniform_u32};

#[derive(Debug, Clone)]
pub struct OperatorSeed {
    pub operator_id: String,
    pub name: String,
    pub shift_id: String,
    pub certifications: BTreeSet<String>,
    pub skills: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub struct EquipmentSeed {
    pub equipment_id: String,
    pub station_id: String,
}

#[derive(Debug, Clone)]
pub struct LotSeed {
    pub lot_id: String,
    pub material_id: String,
    pub supplier_id: String,
}

/// Reference entities generated from the snapshot before the tick loop runs.
/// Every record also appears in `records` as a CDC insert timestamped at the
/// simulation epoch, so seed creation precedes all operational events.
#[derive(Debug, Clone)]
pub struct SeedDataset {
    pub operators: Vec<OperatorSeed>,
    pub equipment: Vec<EquipmentSeed>,
    /// Lot ids per material, in draw rotation order.
    pub lots_by_material: BTreeMap<String, Vec<LotSeed>>,
    pub records: Vec<CdcRecord>,
    entity_tables: BTreeSet<String>,
}

impl SeedDataset {
    /// Number of distinct reference entity types generated.
    pub fn entity_type_count(&self) -> usize {
        self.entity_tables.len()
    }

    pub fn entity_tables(&self) -> &BTreeSet<String> {
        &self.entity_tables
    }
}

/// Deterministically expand a snapshot into its reference dataset.
pub fn generate_seed_entities(snap: &OntologySnapshot, seed: u64) -> SeedDataset {
    let doc = snap.document();
    let calendar = FactoryCalendar::from_document(doc);
    let ts = calendar.timestamp_of_tick(0);
    let mut rng = stream(seed, "seed");
    let mut records: Vec<CdcRecord> = Vec::new();
    let mut entity_tables = BTreeSet::new();

    let emit = |records: &mut Vec<CdcRecord>,
                    entity_tables: &mut BTreeSet<String>,
                    table: &str,
                    payload: serde_json::Value| {
        entity_tables.insert(table.to_string());
        records.push(CdcRecord::new(table, CdcOp::Insert, ts.clone(), payload));
    };

    emit(&mut records, &mut entity_tables, "plant", json!({
        "plant_code": doc.plant_code,
        "plant_name": doc.plant_name,
        "template_id": snap.template_id(),
    }));

    for shift in &doc.shifts {
        emit(&mut records, &mut entity_tables, "shift", json!({
            "shift_id": shift.shift_id,
            "name": shift.name,
            "start_min": shift.start_min,
            "end_min": shift.end_min,
        }));
    }

    for (wc, units) in &doc.work_center_units {
        emit(&mut records, &mut entity_tables, "work_center", json!({"wc_id": wc, "units": units}));
    }

    let station_order = snap.station_order().to_vec();
    for id in &station_order {
        let s = &doc.stations[id];
        emit(&mut records, &mut entity_tables, "station", json!({
            "station_id": id,
            "name": s.name,
            "wc_id": s.work_center,
            "cycle_low": s.cycle_time_range_min.0,
            "cycle_high": s.cycle_time_range_min.1,
            "setup_low": s.setup_time_min.0,
            "setup_high": s.setup_time_min.1,
            "first_pass_yield": s.first_pass_yield,
            "is_quality_gate": s.is_quality_gate,
        }));
    }

    let mut equipment = Vec::new();
    for (id, e) in &doc.equipment {
        equipment.push(EquipmentSeed { equipment_id: id.clone(), station_id: e.station.clone() });
        emit(&mut records, &mut entity_tables, "equipment", json!({
            "equipment_id": id,
            "name": e.name,
            "station_id": e.station,
            "status": "Up",
        }));
    }

    // Operators cycle over the line so every station has certified coverage
    // on every shift.
    let coverage = 3.min(station_order.len());
    let mut operators = Vec::new();
    for shift in &doc.shifts {
        for j in 0..doc.operators_per_shift {
            let operator_id = format!("OP-{}-{:02}", shift.shift_id, j + 1);
            let mut certifications = BTreeSet::new();
            let mut skills = BTreeSet::new();
            for k in 0..coverage {
                let station = &station_order[(j as usize + k) % station_order.len()];
                certifications.extend(doc.station_certifications.get(station).cloned().unwrap_or_default());
                skills.extend(doc.station_skills.get(station).cloned().unwrap_or_default());
            }
            emit(&mut records, &mut entity_tables, "operator", json!({
                "operator_id": operator_id,
                "name": format!("Operator {} {:02}", shift.name, j + 1),
                "shift_id": shift.shift_id,
            }));
            emit(&mut records, &mut entity_tables, "shift_operator", json!({
                "shift_id": shift.shift_id,
                "operator_id": operator_id,
            }));
            for cert in &certifications {
                emit(&mut records, &mut entity_tables, "operator_certification", json!({
                    "operator_id": operator_id,
                    "cert_id": cert,
                }));
            }
            for skill in &skills {
                emit(&mut records, &mut entity_tables, "operator_skill", json!({
                    "operator_id": operator_id,
                    "skill_id": skill,
                }));
            }
            operators.push(OperatorSeed {
                operator_id,
                name: format!("Operator {} {:02}", shift.name, j + 1),
                shift_id: shift.shift_id.clone(),
                certifications,
                skills,
            });
        }
    }

    for (id, c) in &doc.certifications {
        emit(&mut records, &mut entity_tables, "certification", json!({"cert_id": id, "name": c.name}));
    }
    for (id, s) in &doc.skills {
        emit(&mut records, &mut entity_tables, "skill", json!({"skill_id": id, "name": s.name}));
    }
    for (id, p) in &doc.products {
        emit(&mut records, &mut entity_tables, "product", json!({
            "product_id": id, "name": p.name, "daily_volume": p.daily_volume,
        }));
    }
    for (id, m) in &doc.raw_materials {
        emit(&mut records, &mut entity_tables, "raw_material", json!({
            "material_id": id, "name": m.name, "unit": m.unit, "supplier_id": m.supplier,
        }));
        emit(&mut records, &mut entity_tables, "supplier_material", json!({
            "supplier_id": m.supplier, "material_id": id,
        }));
    }
    for (id, m) in &doc.finished_materials {
        emit(&mut records, &mut entity_tables, "finished_material", json!({
            "material_id": id, "name": m.name, "product_id": m.product,
        }));
    }
    for (id, s) in &doc.suppliers {
        emit(&mut records, &mut entity_tables, "supplier", json!({
            "supplier_id": id,
            "name": s.name,
            "country": s.country,
            "lead_low": s.lead_time_days.0,
            "lead_high": s.lead_time_days.1,
            "on_time_rate": s.on_time_rate,
        }));
    }

    // A material's home station, for BOM line annotation.
    let station_of_material: BTreeMap<&String, &String> = doc
        .bom_station_materials
        .iter()
        .flat_map(|(station, mats)| mats.iter().map(move |m| (m, station)))
        .collect();

    for (product, materials) in &doc.product_raw_material {
        let bom_id = format!("BOM-{product}");
        emit(&mut records, &mut entity_tables, "bom_header", json!({
            "bom_id": bom_id, "product_id": product, "revision": "A",
        }));
        for (line_no, material) in materials.iter().enumerate() {
            emit(&mut records, &mut entity_tables, "bom_line", json!({
                "bom_id": bom_id,
                "line_no": line_no + 1,
                "material_id": material,
                "station_id": station_of_material.get(material).map(|s| s.as_str()),
            }));
        }
    }

    let step_ids: Vec<&String> = doc.step_templates.keys().collect();
    for (product, plan) in &doc.process_plans {
        let plan_id = format!("PP-{product}");
        emit(&mut records, &mut entity_tables, "process_plan", json!({
            "plan_id": plan_id, "product_id": product, "revision": "A",
        }));
        for (i, station) in plan.iter().enumerate() {
            emit(&mut records, &mut entity_tables, "process_plan_step", json!({
                "plan_id": plan_id,
                "seq": i + 1,
                "station_id": station,
                "step_template_id": step_ids[i % step_ids.len()],
            }));
        }
    }

    for (id, plan) in &doc.inspection_plans {
        emit(&mut records, &mut entity_tables, "inspection_plan", json!({
            "plan_id": id, "name": plan.name, "sample_size": plan.sample_size,
        }));
        for (i, c) in plan.characteristics.iter().enumerate() {
            emit(&mut records, &mut entity_tables, "inspection_characteristic", json!({
                "plan_id": id,
                "char_no": i + 1,
                "name": c.name,
                "target": c.target,
                "lsl": c.lsl,
                "usl": c.usl,
                "unit": c.unit,
            }));
        }
    }
    for (station, plan) in &doc.station_inspection_plans {
        emit(&mut records, &mut entity_tables, "station_inspection_plan", json!({
            "station_id": station, "plan_id": plan,
        }));
    }

    for (code, fc) in &doc.failure_codes {
        emit(&mut records, &mut entity_tables, "failure_code", json!({
            "code": code, "description": fc.description, "severity": fc.severity,
        }));
    }
    for (station, codes) in &doc.station_failure_codes {
        for code in codes {
            emit(&mut records, &mut entity_tables, "station_failure_code", json!({
                "station_id": station, "code": code,
            }));
        }
    }

    for (id, td) in &doc.tool_definitions {
        emit(&mut records, &mut entity_tables, "tool_definition", json!({
            "tool_def_id": id, "name": td.name, "calibration_interval_days": td.calibration_interval_days,
        }));
    }
    for (station, tools) in &doc.station_tools {
        for tool in tools {
            emit(&mut records, &mut entity_tables, "station_tool", json!({
                "station_id": station, "tool_def_id": tool,
            }));
            let due = sim_epoch().date()
                + chrono::Duration::days(i64::from(doc.tool_definitions[tool].calibration_interval_days));
            emit(&mut records, &mut entity_tables, "tool_instance", json!({
                "tool_instance_id": format!("TI-{station}-{tool}"),
                "tool_def_id": tool,
                "station_id": station,
                "calibration_due": due.format("%Y-%m-%d").to_string(),
            }));
        }
    }

    for (id, st) in &doc.step_templates {
        emit(&mut records, &mut entity_tables, "step_template", json!({
            "step_id": id, "name": st.name, "instruction": st.instruction,
        }));
    }

    // Inbound inventory: a handful of lots per raw material, received before
    // the horizon starts, with supplier delivery performance drawn per lot.
    let mut lots_by_material: BTreeMap<String, Vec<LotSeed>> = BTreeMap::new();
    for (material, m) in &doc.raw_materials {
        let supplier = &doc.suppliers[&m.supplier];
        for k in 0..5u32 {
            let lot_id = format!("LOT-{material}-{k:02}");
            let lead = uniform_u32(&mut rng, supplier.lead_time_days.0, supplier.lead_time_days.1);
            let on_time = rng.random_bool_weighted(supplier.on_time_rate);
            let received = sim_epoch().date() - chrono::Duration::days(i64::from(k * 7 + 1));
            emit(&mut records, &mut entity_tables, "material_lot", json!({
                "lot_id": lot_id,
                "material_id": material,
                "supplier_id": m.supplier,
                "qty": (uniform_f64(&mut rng, 100.0, 1000.0) * 10.0).round() / 10.0,
                "received_date": received.format("%Y-%m-%d").to_string(),
                "lead_time_days": lead,
                "on_time": on_time,
            }));
            lots_by_material.entry(material.clone()).or_default().push(LotSeed {
                lot_id,
                material_id: material.clone(),
                supplier_id: m.supplier.clone(),
            });
        }
    }

    for (i, zone) in ["RAW", "RAW", "WIP", "WIP", "WIP", "FG", "FG", "STAGE"].iter().enumerate() {
        emit(&mut records, &mut entity_tables, "storage_location", json!({
            "location_id": format!("LOC-{:02}", i + 1),
            "zone": zone,
            "capacity": 40 + 10 * i,
        }));
    }

    for (id, d) in &doc.ncr_dispositions {
        emit(&mut records, &mut entity_tables, "ncr_disposition", json!({
            "disposition_id": id, "description": d.description, "weight": d.weight,
        }));
    }

    for station in &station_order {
        let standards = doc
            .station_regulatory
            .get(station)
            .cloned()
            .unwrap_or_else(|| {
                doc.regulatory_authority
                    .split('/')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            });
        for standard in standards {
            emit(&mut records, &mut entity_tables, "regulatory_standard", json!({
                "station_id": station, "standard": standard,
            }));
        }
    }

    for (alias, target) in &doc.entity_aliases {
        emit(&mut records, &mut entity_tables, "entity_alias", json!({
            "alias": alias, "kind": target.kind, "entity_id": target.id,
        }));
    }

    SeedDataset { operators, equipment, lots_by_material, records, entity_tables }
}

trait BoolDraw {
    fn random_bool_weighted(&mut self, p: f64) -> bool;
}

impl BoolDraw for rand_chacha::ChaCha8Rng {
    fn random_bool_weighted(&mut self, p: f64) -> bool {
        use rand::Rng;
        self.random::<f64>() < p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::builtin_snapshot;

    #[test]
    fn operator_count_is_per_shift_times_shift_count() {
        let snap = builtin_snapshot("aerospace").unwrap();
        let dataset = generate_seed_entities(&snap, 42);
        let doc = snap.document();
        assert_eq!(
            dataset.operators.len(),
            (doc.operators_per_shift as usize) * doc.shifts.len()
        );
    }

    #[test]
    fn same_seed_is_identical() {
        let snap = builtin_snapshot("pharma").unwrap();
        let a = generate_seed_entities(&snap, 42);
        let b = generate_seed_entities(&snap, 42);
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn at_least_thirty_entity_types() {
        for template in crate::ontology::template_names() {
            let snap = builtin_snapshot(template).unwrap();
            let dataset = generate_seed_entities(&snap, 42);
            assert!(
                dataset.entity_type_count() >= 30,
                "{template}: {} ({:?})",
                dataset.entity_type_count(),
                dataset.entity_tables()
            );
        }
    }

    #[test]
    fn every_station_has_certified_coverage_on_every_shift() {
        for template in crate::ontology::template_names() {
            let snap = builtin_snapshot(template).unwrap();
            let doc = snap.document();
            let dataset = generate_seed_entities(&snap, 42);
            for shift in &doc.shifts {
                for (station, required) in &doc.station_certifications {
                    let covered = dataset.operators.iter().any(|o| {
                        o.shift_id == shift.shift_id
                            && required.iter().all(|c| o.certifications.contains(c))
                    });
                    assert!(covered, "{template}: no {station} coverage on {}", shift.shift_id);
                }
            }
        }
    }
}
