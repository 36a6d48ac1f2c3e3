//! The three-operation interface contract over a pinned ontology snapshot.
//!
//! `resolve` maps a tool parameter to a node or rejects it with the complete
//! valid set; `contextualize` assembles the relational context of a resolved
//! node; `annotate` wraps a tool result with the context and ontology version
//! that produced it. All three are pure functions over immutable snapshots.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::OntologySnapshot;

/// Every resolvable entity category. Each kind maps to exactly one export
/// collection in the ontology document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    Station,
    WorkCenter,
    Equipment,
    Product,
    RawMaterial,
    FinishedMaterial,
    Supplier,
    FailureCode,
    Certification,
    Skill,
    ToolDefinition,
    InspectionPlan,
    NcrDisposition,
}

impl EntityKind {
    pub const ALL: [EntityKind; 13] = [
        EntityKind::Station,
        EntityKind::WorkCenter,
        EntityKind::Equipment,
        EntityKind::Product,
        EntityKind::RawMaterial,
        EntityKind::FinishedMaterial,
        EntityKind::Supplier,
        EntityKind::FailureCode,
        EntityKind::Certification,
        EntityKind::Skill,
        EntityKind::ToolDefinition,
        EntityKind::InspectionPlan,
        EntityKind::NcrDisposition,
    ];

    /// The export collection this kind resolves against.
    pub fn collection(self) -> &'static str {
        match self {
            EntityKind::Station => "STATIONS",
            EntityKind::WorkCenter => "WORK_CENTER_UNITS",
            EntityKind::Equipment => "EQUIPMENT",
            EntityKind::Product => "PRODUCTS",
            EntityKind::RawMaterial => "RAW_MATERIALS",
            EntityKind::FinishedMaterial => "FINISHED_MATERIALS",
            EntityKind::Supplier => "SUPPLIERS",
            EntityKind::FailureCode => "FAILURE_CODES",
            EntityKind::Certification => "CERTIFICATIONS",
            EntityKind::Skill => "SKILLS",
            EntityKind::ToolDefinition => "TOOL_DEFINITIONS",
            EntityKind::InspectionPlan => "INSPECTION_PLANS",
            EntityKind::NcrDisposition => "NCR_DISPOSITIONS",
        }
    }
}

/// A parameter value that resolved against a snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRef {
    pub kind: EntityKind,
    pub id: String,
    pub snapshot_version: String,
}

/// The designed rejection path: the rejected value plus the complete valid
/// set for the kind, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("'{rejected_value}' is not a known {kind:?}; valid: {}", .valid_set.join(", "))]
pub struct ResolutionError {
    pub kind: EntityKind,
    pub rejected_value: String,
    pub valid_set: Vec<String>,
}

impl ResolutionError {
    /// The exact wire payload agents receive for self-correction.
    pub fn wire_payload(&self) -> serde_json::Value {
        serde_json::json!({
            "error": "invalid_parameter",
            "kind": self.kind,
            "rejected": self.rejected_value,
            "valid": self.valid_set,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error("context was produced by snapshot {context_version} but the call targets {snapshot_version}")]
    VersionMismatch {
        context_version: String,
        snapshot_version: String,
    },
}

/// Station process parameters surfaced in a domain context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessParameters {
    pub cycle_time_range_min: (f64, f64),
    pub setup_time_min: (f64, f64),
    pub first_pass_yield: f64,
    pub is_quality_gate: bool,
}

/// The relational payload attached to a resolved entity: what can fail here,
/// which standards govern it, where it sits in the line, and which fact
/// tables queries about it should join against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainContext {
    pub node: NodeRef,
    pub applicable_failure_codes: Vec<String>,
    pub regulatory_standards: Vec<String>,
    pub process_parameters: Option<ProcessParameters>,
    pub upstream: Option<NodeRef>,
    pub downstream: Option<NodeRef>,
    pub join_hints: Vec<String>,
    pub required_certifications: Vec<String>,
}

/// A tool result wrapped with the context and ontology version that produced
/// it. `context` is absent only for line-scoped results that name no entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedResult {
    pub result: serde_json::Value,
    pub context: Option<DomainContext>,
    pub snapshot_version: String,
    pub produced_at: String,
}

/// Resolve a parameter value to a node by exact id match. No case folding,
/// no alias search, no fuzzy repair: anything but an exact member of the
/// kind's id set returns the complete sorted valid set.
pub fn resolve(
    param_value: &str,
    kind: EntityKind,
    snap: &OntologySnapshot,
) -> Result<NodeRef, ResolutionError> {
    let ids = snap
        .id_set(kind.collection())
        .expect("every EntityKind maps to an indexed collection");
    if ids.contains(param_value) {
        Ok(NodeRef {
            kind,
            id: param_value.to_string(),
            snapshot_version: snap.version_id().to_string(),
        })
    } else {
        Err(ResolutionError {
            kind,
            rejected_value: param_value.to_string(),
            valid_set: ids.sorted().to_vec(),
        })
    }
}

/// Assemble the domain context of a resolved node, purely from snapshot
/// fields. Fails if the node was resolved against a different snapshot.
pub fn contextualize(
    node: &NodeRef,
    snap: &OntologySnapshot,
) -> Result<DomainContext, ContractError> {
    if node.snapshot_version != snap.version_id() {
        return Err(ContractError::VersionMismatch {
            context_version: node.snapshot_version.clone(),
            snapshot_version: snap.version_id().to_string(),
        });
    }
    let doc = snap.document();

    let applicable_failure_codes = match node.kind {
        EntityKind::Station => doc.station_failure_codes.get(&node.id).cloned().unwrap_or_default(),
        EntityKind::FailureCode => vec![node.id.clone()],
        _ => Vec::new(),
    };

    let regulatory_standards = match node.kind {
        EntityKind::Station => doc
            .station_regulatory
            .get(&node.id)
            .cloned()
            .unwrap_or_else(|| default_standards(&doc.regulatory_authority)),
        _ => default_standards(&doc.regulatory_authority),
    };

    let (process_parameters, upstream, downstream) = if node.kind == EntityKind::Station {
        let station = &doc.stations[&node.id];
        let order = snap.station_order();
        let pos = order.iter().position(|id| *id == node.id).expect("station is in line order");
        let neighbor = |idx: Option<usize>| {
            idx.and_then(|i| order.get(i)).map(|id| NodeRef {
                kind: EntityKind::Station,
                id: id.clone(),
                snapshot_version: snap.version_id().to_string(),
            })
        };
        (
            Some(ProcessParameters {
                cycle_time_range_min: station.cycle_time_range_min,
                setup_time_min: station.setup_time_min,
                first_pass_yield: station.first_pass_yield,
                is_quality_gate: station.is_quality_gate,
            }),
            neighbor(pos.checked_sub(1)),
            neighbor(Some(pos + 1)),
        )
    } else {
        (None, None, None)
    };

    let required_certifications = match node.kind {
        EntityKind::Station => doc.station_certifications.get(&node.id).cloned().unwrap_or_default(),
        EntityKind::Certification => vec![node.id.clone()],
        _ => Vec::new(),
    };

    Ok(DomainContext {
        node: node.clone(),
        applicable_failure_codes,
        regulatory_standards,
        process_parameters,
        upstream,
        downstream,
        join_hints: crate::warehouse::fact_tables_for(node.kind)
            .iter()
            .map(|t| t.to_string())
            .collect(),
        required_certifications,
    })
}

fn default_standards(authority: &str) -> Vec<String> {
    authority
        .split('/')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Wrap a structured result with its context and ontology version.
pub fn annotate(
    result: serde_json::Value,
    ctx: &DomainContext,
    snap: &OntologySnapshot,
) -> Result<AnnotatedResult, ContractError> {
    if ctx.node.snapshot_version != snap.version_id() {
        return Err(ContractError::VersionMismatch {
            context_version: ctx.node.snapshot_version.clone(),
            snapshot_version: snap.version_id().to_string(),
        });
    }
    Ok(AnnotatedResult {
        result,
        context: Some(ctx.clone()),
        snapshot_version: snap.version_id().to_string(),
        produced_at: chrono::Utc::now().to_rfc3339(),
    })
}

/// Wrap a line-scoped result that names no entity. The version stamp still
/// applies; only the per-entity context is absent.
pub fn annotate_unscoped(result: serde_json::Value, snap: &OntologySnapshot) -> AnnotatedResult {
    AnnotatedResult {
        result,
        context: None,
        snapshot_version: snap.version_id().to_string(),
        produced_at: chrono::Utc::now().to_rfc3339(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::builtin_snapshot;

    #[test]
    fn fabricated_station_id_is_rejected_with_the_full_valid_set() {
        let snap = builtin_snapshot("aerospace").unwrap();
        let err = resolve("BOND-1", EntityKind::Station, &snap).unwrap_err();
        assert_eq!(err.kind, EntityKind::Station);
        assert_eq!(err.rejected_value, "BOND-1");
        assert_eq!(err.valid_set, vec!["S1", "S2", "S3", "S4", "S5", "S6"]);
    }

    #[test]
    fn exact_station_id_resolves() {
        let snap = builtin_snapshot("aerospace").unwrap();
        let node = resolve("S4", EntityKind::Station, &snap).unwrap();
        assert_eq!(node.id, "S4");
        assert_eq!(node.kind, EntityKind::Station);
        assert_eq!(node.snapshot_version, snap.version_id());
    }

    #[test]
    fn empty_string_never_resolves() {
        let snap = builtin_snapshot("pharma").unwrap();
        for kind in EntityKind::ALL {
            assert!(resolve("", kind, &snap).is_err(), "{kind:?}");
        }
    }

    #[test]
    fn no_case_folding() {
        let snap = builtin_snapshot("aerospace").unwrap();
        assert!(resolve("s4", EntityKind::Station, &snap).is_err());
    }

    #[test]
    fn aerospace_bonding_context() {
        let snap = builtin_snapshot("aerospace").unwrap();
        let node = resolve("S4", EntityKind::Station, &snap).unwrap();
        let ctx = contextualize(&node, &snap).unwrap();

        let descriptions: Vec<&str> = ctx
            .applicable_failure_codes
            .iter()
            .map(|code| snap.document().failure_codes[code].description.as_str())
            .collect();
        for expected in ["Bond-line void", "Adhesive cure deviation", "Surface contamination"] {
            assert!(descriptions.contains(&expected), "missing {expected}: {descriptions:?}");
        }
        assert!(ctx.regulatory_standards.iter().any(|s| s == "NADCAP"));
        let downstream = ctx.downstream.unwrap();
        assert_eq!(downstream.id, "S5");
        assert_eq!(snap.document().stations["S5"].name, "NDT");
    }

    #[test]
    fn pharma_s4_is_compression_under_gmp() {
        let snap = builtin_snapshot("pharma").unwrap();
        let node = resolve("S4", EntityKind::Station, &snap).unwrap();
        let ctx = contextualize(&node, &snap).unwrap();
        assert_eq!(snap.document().stations["S4"].name, "Compression");
        assert!(ctx.regulatory_standards.contains(&"GMP".to_string()));
        assert!(ctx.regulatory_standards.contains(&"21 CFR 11".to_string()));
    }

    #[test]
    fn first_station_has_no_upstream() {
        for template in crate::ontology::template_names() {
            let snap = builtin_snapshot(template).unwrap();
            let first = snap.station_order()[0].clone();
            let node = resolve(&first, EntityKind::Station, &snap).unwrap();
            let ctx = contextualize(&node, &snap).unwrap();
            assert!(ctx.upstream.is_none(), "{template}");
        }
    }

    #[test]
    fn fourteen_station_line_orders_naturally() {
        let snap = builtin_snapshot("food_beverage").unwrap();
        let node = resolve("S9", EntityKind::Station, &snap).unwrap();
        let ctx = contextualize(&node, &snap).unwrap();
        assert_eq!(ctx.upstream.unwrap().id, "S8");
        assert_eq!(ctx.downstream.unwrap().id, "S10");
    }

    #[test]
    fn contextualize_rejects_cross_version_nodes() {
        let a = builtin_snapshot("aerospace").unwrap();
        let mut doc = a.document().clone();
        doc.stations.get_mut("S1").unwrap().first_pass_yield = 0.96;
        let b = crate::ontology::snapshot(doc, "aerospace-tweaked");
        let node = resolve("S4", EntityKind::Station, &a).unwrap();
        assert!(matches!(
            contextualize(&node, &b),
            Err(ContractError::VersionMismatch { .. })
        ));
    }

    #[test]
    fn annotate_rejects_cross_version_context() {
        let a = builtin_snapshot("aerospace").unwrap();
        let mut doc = a.document().clone();
        doc.stations.get_mut("S1").unwrap().first_pass_yield = 0.96;
        let b = crate::ontology::snapshot(doc, "aerospace-tweaked");
        let node = resolve("S4", EntityKind::Station, &a).unwrap();
        let ctx = contextualize(&node, &a).unwrap();
        assert!(annotate(serde_json::json!({"ok": true}), &ctx, &b).is_err());
    }

    #[test]
    fn annotate_preserves_context_and_version() {
        let snap = builtin_snapshot("aerospace").unwrap();
        let node = resolve("S4", EntityKind::Station, &snap).unwrap();
        let ctx = contextualize(&node, &snap).unwrap();
        let annotated = annotate(serde_json::json!({"metric": "throughput"}), &ctx, &snap).unwrap();
        assert_eq!(annotated.snapshot_version, snap.version_id());
        assert_eq!(annotated.context.as_ref().unwrap(), &ctx);
        let again = contextualize(&node, &snap).unwrap();
        assert_eq!(again, ctx);
    }

    #[test]
    fn every_kind_resolves_something_in_every_builtin() {
        for template in crate::ontology::template_names() {
            let snap = builtin_snapshot(template).unwrap();
            for kind in EntityKind::ALL {
                let ids = snap.id_set(kind.collection()).unwrap();
                assert!(!ids.is_empty(), "{template} has no {kind:?}");
                let id = ids.sorted()[0].clone();
                let node = resolve(&id, kind, &snap).unwrap();
                assert_eq!(node.id, id);
                contextualize(&node, &snap).unwrap();
            }
        }
    }
}
