//! Declarative plant ontology: loading, validation, versioned snapshots, diffs.
//!
//! An ontology document is a single JSON object with 45 required top-level
//! keys (see [`REQUIRED_EXPORTS`]) describing one manufacturing vertical:
//! equipment hierarchy, products and routings, materials, quality vocabulary,
//! workforce qualifications, and simulation parameters. Loading validates the
//! whole document at once: every missing key and every referential violation
//! is reported in a single error, never first-failure.

mod builtin;
mod counts;
mod diff;
mod document;
mod load;
mod snapshot;

pub use builtin::{builtin_snapshot, load_builtin, template_names, template_source};
pub use counts::{builtin_expected_counts, measure_counts, validate_counts, ComplexityRow, CountCheck, ValidationReport};
pub use diff::{apply_diff, diff, DiffEntry, OntologyDiff};
pub use document::{
    ChangePackageParams, DispositionDef, EntityAlias, EquipmentDef, FailureCodeDef,
    FinishedMaterialDef, InspectionCharacteristic, InspectionPlanDef, MaterialDraw, NamedDef,
    OntologyDocument, ProductDef, RawMaterialDef, ShiftDef, StationDef, StepTemplateDef,
    SupplierDef, ToolDef, REQUIRED_EXPORTS,
};
pub use load::{load_document, load_document_str, LoadError, Violation};
pub use snapshot::{canonical_json, snapshot, IdSet, OntologySnapshot};
