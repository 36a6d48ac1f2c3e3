use serde::{Deserialize, Serialize};

use crate::contract::EntityKind;
use crate::ontology::OntologySnapshot;

/// Whether entity parameters are served as closed enums projected from the
/// snapshot or as free strings. Enforcement at invoke time is identical in
/// both modes; the mode only changes what a model sees in the schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    Constrained,
    Unconstrained,
}

impl ConstraintMode {
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "constrained" => Some(ConstraintMode::Constrained),
            "unconstrained" => Some(ConstraintMode::Unconstrained),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainGroup {
    Production,
    Quality,
    Materials,
    EngineeringChange,
    Operations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "values")]
pub enum Constraint {
    /// Closed set projected from the pinned snapshot, sorted ascending.
    Constrained(Vec<String>),
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub entity_kind: Option<EntityKind>,
    pub constraint: Constraint,
    pub required: bool,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub domain_group: DomainGroup,
    pub description: String,
    pub params: Vec<ParamSpec>,
}

impl ToolSpec {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }
}

struct ParamTemplate {
    name: &'static str,
    entity_kind: Option<EntityKind>,
    required: bool,
    description: &'static str,
}

struct ToolTemplate {
    name: &'static str,
    group: DomainGroup,
    description: &'static str,
    params: &'static [ParamTemplate],
}

const fn p(
    name: &'static str,
    entity_kind: Option<EntityKind>,
    required: bool,
    description: &'static str,
) -> ParamTemplate {
    ParamTemplate { name, entity_kind, required, description }
}

const PERIOD: ParamTemplate = p(
    "period",
    None,
    false,
    "ISO week (2025-W03), day (2025-01-08), or day range (2025-01-06..2025-01-17); omit for the full horizon",
);

/// The twelve analytics tools, grouped 3/3/2/2/2 across production, quality,
/// materials, engineering change, and operations.
const CATALOG: [ToolTemplate; 12] = [
    ToolTemplate {
        name: "cycle_time",
        group: DomainGroup::Production,
        description: "Cycle time statistics for one station: average, spread, and per-day trend",
        params: &[p("station_id", Some(EntityKind::Station), true, "Station to analyze"), PERIOD],
    },
    ToolTemplate {
        name: "first_pass_yield",
        group: DomainGroup::Production,
        description: "First-pass yield for one station with a per-day trend",
        params: &[p("station_id", Some(EntityKind::Station), true, "Station to analyze"), PERIOD],
    },
    ToolTemplate {
        name: "oee_decomposition",
        group: DomainGroup::Production,
        description: "OEE for one station decomposed into availability, performance, and quality",
        params: &[p("station_id", Some(EntityKind::Station), true, "Station to analyze"), PERIOD],
    },
    ToolTemplate {
        name: "ncr_pareto",
        group: DomainGroup::Quality,
        description: "Non-conformance counts by failure code, descending",
        params: &[
            p("station_id", Some(EntityKind::Station), false, "Restrict to one station"),
            p("failure_code", Some(EntityKind::FailureCode), false, "Restrict to one failure code"),
            PERIOD,
        ],
    },
    ToolTemplate {
        name: "spc_violation",
        group: DomainGroup::Quality,
        description: "Out-of-limit SPC samples for one station by characteristic",
        params: &[p("station_id", Some(EntityKind::Station), true, "Station to analyze"), PERIOD],
    },
    ToolTemplate {
        name: "quality_action",
        group: DomainGroup::Quality,
        description: "NCR disposition and CAPA activity, optionally for one disposition",
        params: &[
            p("disposition", Some(EntityKind::NcrDisposition), false, "Restrict to one disposition"),
            PERIOD,
        ],
    },
    ToolTemplate {
        name: "material_genealogy",
        group: DomainGroup::Materials,
        description: "Trace consumed lots for an order, or orders that consumed a material",
        params: &[
            p("order_id", None, false, "Work order to trace (transactional id)"),
            p("material_id", Some(EntityKind::RawMaterial), false, "Raw material to trace"),
        ],
    },
    ToolTemplate {
        name: "supplier_performance",
        group: DomainGroup::Materials,
        description: "Delivery performance and consumption volume for one supplier",
        params: &[p("supplier_id", Some(EntityKind::Supplier), true, "Supplier to analyze"), PERIOD],
    },
    ToolTemplate {
        name: "change_impact",
        group: DomainGroup::EngineeringChange,
        description: "Engineering changes and plan revisions touching a station",
        params: &[
            p("station_id", Some(EntityKind::Station), false, "Restrict to one station"),
            PERIOD,
        ],
    },
    ToolTemplate {
        name: "change_velocity",
        group: DomainGroup::EngineeringChange,
        description: "Change package throughput per ISO week",
        params: &[
            p("station_id", Some(EntityKind::Station), false, "Restrict to one station"),
            PERIOD,
        ],
    },
    ToolTemplate {
        name: "equipment_downtime",
        group: DomainGroup::Operations,
        description: "Downtime events and minutes lost, by equipment unit",
        params: &[
            p("station_id", Some(EntityKind::Station), false, "Restrict to one station"),
            PERIOD,
        ],
    },
    ToolTemplate {
        name: "production_status",
        group: DomainGroup::Operations,
        description: "Line-level order status and WIP, optionally for one station",
        params: &[
            p("station_id", Some(EntityKind::Station), false, "Restrict to one station"),
            PERIOD,
        ],
    },
];

/// Project the 12 tool schemas against a snapshot. In constrained mode every
/// entity parameter carries the snapshot's current id set; switching
/// snapshots changes the enums with no code change.
pub fn project_schemas(snap: &OntologySnapshot, mode: ConstraintMode) -> Vec<ToolSpec> {
    CATALOG
        .iter()
        .map(|t| ToolSpec {
            name: t.name.to_string(),
            domain_group: t.group,
            description: t.description.to_string(),
            params: t
                .params
                .iter()
                .map(|p| {
                    let constraint = match (mode, p.entity_kind) {
                        (ConstraintMode::Constrained, Some(kind)) => Constraint::Constrained(
                            snap.id_set(kind.collection())
                                .expect("kind is indexed")
                                .sorted()
                                .to_vec(),
                        ),
                        _ => Constraint::Unconstrained,
                    };
                    ParamSpec {
                        name: p.name.to_string(),
                        entity_kind: p.entity_kind,
                        constraint,
                        required: p.required,
                        description: p.description.to_string(),
                    }
                })
                .collect(),
        })
        .collect()
}
