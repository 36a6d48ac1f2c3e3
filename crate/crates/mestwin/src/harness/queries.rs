use serde::{Deserialize, Serialize};

use crate::ontology::OntologySnapshot;

/// One natural-language query. The text names its target only by domain
/// phrasing. Mapping the phrase back to an identifier is the model's job,
/// and exactly the step where fabrication can happen.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryCase {
    pub template_id: String,
    pub tool_name: String,
    pub text: String,
    /// Parameter the entity goes into.
    pub param_name: String,
    /// Ground-truth id the phrase denotes.
    pub expected_id: String,
}

/// Twelve queries for one configuration, one per tool, phrased the way a
/// quality engineer or production manager would ask.
pub fn queries_for(snap: &OntologySnapshot) -> Vec<QueryCase> {
    let doc = snap.document();
    let order = snap.station_order();
    let station = |i: usize| order[i % order.len()].clone();
    let station_phrase = |i: usize| doc.stations[&station(i)].name.to_lowercase();

    // First product's first raw material, and its supplier, anchor the
    // materials queries.
    let material_id = doc
        .product_raw_material
        .values()
        .next()
        .and_then(|mats| mats.first())
        .expect("every template has BOM materials")
        .clone();
    let material_phrase = doc.raw_materials[&material_id].name.to_lowercase();
    let supplier_id = doc.raw_materials[&material_id].supplier.clone();
    let supplier_phrase = doc.suppliers[&supplier_id].name.to_lowercase();

    let template = snap.template_id().to_string();
    let case = |tool: &str, text: String, param: &str, expected: String| QueryCase {
        template_id: template.clone(),
        tool_name: tool.to_string(),
        text,
        param_name: param.to_string(),
        expected_id: expected,
    };

    vec![
        case(
            "cycle_time",
            format!("Show me cycle time analysis for the {} station", station_phrase(0)),
            "station_id",
            station(0),
        ),
        case(
            "first_pass_yield",
            format!("What is the first pass yield at the {} station this month?", station_phrase(1)),
            "station_id",
            station(1),
        ),
        case(
            "oee_decomposition",
            format!("Break down OEE for the {} station", station_phrase(2)),
            "station_id",
            station(2),
        ),
        case(
            "ncr_pareto",
            format!("What are the top failure modes at the {} station?", station_phrase(3)),
            "station_id",
            station(3),
        ),
        case(
            "spc_violation",
            format!("Any SPC violations at the {} station lately?", station_phrase(4)),
            "station_id",
            station(4),
        ),
        case(
            "quality_action",
            "How many nonconformances ended up being reworked?".to_string(),
            "disposition",
            "rework".to_string(),
        ),
        case(
            "material_genealogy",
            format!("Trace where the {material_phrase} has been consumed"),
            "material_id",
            material_id,
        ),
        case(
            "supplier_performance",
            format!("What is supplier performance for {supplier_phrase}?"),
            "supplier_id",
            supplier_id,
        ),
        case(
            "change_impact",
            format!("Which engineering changes touch the {} station?", station_phrase(3)),
            "station_id",
            station(3),
        ),
        case(
            "change_velocity",
            format!("How fast are changes moving for the {} station?", station_phrase(2)),
            "station_id",
            station(2),
        ),
        case(
            "equipment_downtime",
            format!("Summarize equipment downtime at the {} station", station_phrase(0)),
            "station_id",
            station(0),
        ),
        case(
            "production_status",
            format!("What's the production status at the {} station?", station_phrase(5)),
            "station_id",
            station(5),
        ),
    ]
}

/// Plausible-but-nonexistent identifiers a model might produce for each
/// configuration. None of these collide with a real id in its template.
pub fn fabrication_lexicon(template_id: &str) -> Vec<&'static str> {
    match template_id {
        "aerospace" => vec!["BOND-1", "CNC-BAY-A", "NDT-INSPECT", "RIVET-CELL-2", "ALU-VENDOR-1", "FASTENER-SUPPLY"],
        "pharma" => vec!["TABLET-PRESS-1", "COATING-LINE", "GRANULATOR-A", "BLEND-TANK-3", "API-VENDOR-1", "QC-LAB-2"],
        "automotive" => vec!["CASTING-1", "HEAT-TREAT-A", "MACHINING-BAY", "WELD-CELL-7", "PAINT-LINE-2", "STEEL-VENDOR"],
        "electronics" => vec!["SMT-LINE-1", "REFLOW-OVEN", "AOI-STATION", "ICT-BAY-2", "PCB-VENDOR-A", "STENCIL-RACK-3"],
        "food_beverage" => vec!["FILLER-1", "CARBONATION-UNIT", "BOTTLING-LINE", "PASTEUR-2", "SYRUP-TANK-A", "SUGAR-VENDOR"],
        "warehousing" => vec!["PICK-ZONE-A", "SORTER-1", "RECEIVING-DOCK", "PACK-BENCH-3", "CARTON-VENDOR", "DOCK-DOOR-9"],
        _ => vec!["STATION-X", "LINE-1", "UNIT-A"],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::{builtin_snapshot, template_names};

    #[test]
    fn every_template_gets_twelve_queries_one_per_tool() {
        let mut total = 0;
        for template in template_names() {
            let snap = builtin_snapshot(template).unwrap();
            let queries = queries_for(&snap);
            assert_eq!(queries.len(), 12, "{template}");
            let tools: std::collections::BTreeSet<&str> =
                queries.iter().map(|q| q.tool_name.as_str()).collect();
            assert_eq!(tools.len(), 12, "{template}: duplicate tool");
            total += queries.len();
        }
        assert_eq!(total, 72);
    }

    #[test]
    fn query_text_never_leaks_the_expected_id() {
        for template in template_names() {
            let snap = builtin_snapshot(template).unwrap();
            for q in queries_for(&snap) {
                if q.param_name == "disposition" {
                    continue; // dispositions are plain words by design
                }
                assert!(
                    !q.text.to_uppercase().contains(&q.expected_id.to_uppercase()),
                    "{template}/{}: '{}' leaks {}",
                    q.tool_name,
                    q.text,
                    q.expected_id
                );
            }
        }
    }

    #[test]
    fn expected_ids_resolve_and_lexicon_entries_do_not() {
        use crate::contract::{resolve, EntityKind};
        for template in template_names() {
            let snap = builtin_snapshot(template).unwrap();
            for q in queries_for(&snap) {
                let kind = match q.param_name.as_str() {
                    "station_id" => EntityKind::Station,
                    "disposition" => EntityKind::NcrDisposition,
                    "material_id" => EntityKind::RawMaterial,
                    "supplier_id" => EntityKind::Supplier,
                    other => panic!("unexpected param {other}"),
                };
                assert!(resolve(&q.expected_id, kind, &snap).is_ok(), "{template}/{}", q.tool_name);
            }
            for fake in fabrication_lexicon(template) {
                for kind in EntityKind::ALL {
                    assert!(
                        resolve(fake, kind, &snap).is_err(),
                        "{template}: lexicon entry {fake} collides with a real {kind:?}"
                    );
                }
            }
        }
    }
}
