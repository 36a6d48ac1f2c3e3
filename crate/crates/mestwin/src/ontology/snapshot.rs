use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use serde_json::Value;
use sha2::{Digest, Sha256};

use super::document::OntologyDocument;

/// Identifier membership for one entity collection: a hash set for constant
/// time resolution plus the same ids pre-sorted for error payloads and
/// schema projection.
#[derive(Debug, Clone)]
pub struct IdSet {
    set: HashSet<String>,
    sorted: Vec<String>,
}

impl IdSet {
    fn new(ids: impl Iterator<Item = String>) -> Self {
        let sorted: Vec<String> = ids.collect();
        let set = sorted.iter().cloned().collect();
        IdSet { set, sorted }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.set.contains(id)
    }

    /// All ids, ascending.
    pub fn sorted(&self) -> &[String] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }
}

/// An immutable, content-addressed view of a loaded ontology document.
///
/// Two snapshots of byte-identical documents always share a `version_id`;
/// changing any field changes it. Snapshots are cheap to clone and safe to
/// share across threads.
#[derive(Debug, Clone)]
pub struct OntologySnapshot {
    inner: Arc<SnapshotInner>,
}

#[derive(Debug)]
struct SnapshotInner {
    document: OntologyDocument,
    version_id: String,
    created_at: String,
    template_id: String,
    index: HashMap<&'static str, IdSet>,
    station_order: Vec<String>,
}

/// Export collections that participate in entity resolution.
#[cfg(test)]
pub(crate) const INDEXED_COLLECTIONS: [&str; 13] = [
    "STATIONS",
    "WORK_CENTER_UNITS",
    "EQUIPMENT",
    "PRODUCTS",
    "RAW_MATERIALS",
    "FINISHED_MATERIALS",
    "SUPPLIERS",
    "FAILURE_CODES",
    "CERTIFICATIONS",
    "SKILLS",
    "TOOL_DEFINITIONS",
    "INSPECTION_PLANS",
    "NCR_DISPOSITIONS",
];

/// Build an immutable snapshot of a validated document.
pub fn snapshot(document: OntologyDocument, template_id: &str) -> OntologySnapshot {
    let version_id = version_of(&document);
    let station_order = document.station_order();
    let mut index = HashMap::new();
    {
        let d = &document;
        let mut add = |name: &'static str, keys: Vec<String>| {
            index.insert(name, IdSet::new(keys.into_iter()));
        };
        add("STATIONS", d.stations.keys().cloned().collect());
        add("WORK_CENTER_UNITS", d.work_center_units.keys().cloned().collect());
        add("EQUIPMENT", d.equipment.keys().cloned().collect());
        add("PRODUCTS", d.products.keys().cloned().collect());
        add("RAW_MATERIALS", d.raw_materials.keys().cloned().collect());
        add("FINISHED_MATERIALS", d.finished_materials.keys().cloned().collect());
        add("SUPPLIERS", d.suppliers.keys().cloned().collect());
        add("FAILURE_CODES", d.failure_codes.keys().cloned().collect());
        add("CERTIFICATIONS", d.certifications.keys().cloned().collect());
        add("SKILLS", d.skills.keys().cloned().collect());
        add("TOOL_DEFINITIONS", d.tool_definitions.keys().cloned().collect());
        add("INSPECTION_PLANS", d.inspection_plans.keys().cloned().collect());
        add("NCR_DISPOSITIONS", d.ncr_dispositions.keys().cloned().collect());
    }
    OntologySnapshot {
        inner: Arc::new(SnapshotInner {
            document,
            version_id,
            created_at: chrono::Utc::now().to_rfc3339(),
            template_id: template_id.to_string(),
            index,
            station_order,
        }),
    }
}

impl OntologySnapshot {
    pub fn document(&self) -> &OntologyDocument {
        &self.inner.document
    }

    /// Content hash of the canonical serialization; the session pinning key.
    pub fn version_id(&self) -> &str {
        &self.inner.version_id
    }

    pub fn created_at(&self) -> &str {
        &self.inner.created_at
    }

    pub fn template_id(&self) -> &str {
        &self.inner.template_id
    }

    /// Ids of one resolvable collection, by export name.
    pub fn id_set(&self, collection: &str) -> Option<&IdSet> {
        self.inner.index.get(collection)
    }

    /// Station ids in line order.
    pub fn station_order(&self) -> &[String] {
        &self.inner.station_order
    }

    /// Canonical JSON value of the document (sorted keys at every level).
    pub fn canonical_value(&self) -> Value {
        serde_json::to_value(&self.inner.document).expect("document serializes")
    }
}

/// Render a JSON value in canonical form: object keys sorted ascending, no
/// insignificant whitespace, numbers in serde_json's deterministic shortest
/// round-trip decimal form.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}:", Value::String((*key).clone()));
                write_canonical(&map[*key], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        leaf => {
            let _ = write!(out, "{leaf}");
        }
    }
}

fn version_of(document: &OntologyDocument) -> String {
    let value = serde_json::to_value(document).expect("document serializes");
    let canonical = canonical_json(&value);
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::load_builtin;

    #[test]
    fn identical_documents_share_a_version_id() {
        let doc = load_builtin("aerospace").unwrap();
        let a = snapshot(doc.clone(), "aerospace");
        let b = snapshot(doc, "aerospace");
        assert_eq!(a.version_id(), b.version_id());
    }

    #[test]
    fn any_field_change_changes_the_version_id() {
        let doc = load_builtin("aerospace").unwrap();
        let a = snapshot(doc.clone(), "aerospace");
        let mut changed = doc;
        changed.stations.get_mut("S4").unwrap().first_pass_yield = 0.955;
        let b = snapshot(changed, "aerospace");
        assert_ne!(a.version_id(), b.version_id());
    }

    #[test]
    fn version_id_survives_serialization_round_trip() {
        let doc = load_builtin("aerospace").unwrap();
        let a = snapshot(doc.clone(), "aerospace");
        let text = serde_json::to_string(&doc).unwrap();
        let reloaded = crate::ontology::load_document_str(&text).unwrap();
        let b = snapshot(reloaded, "aerospace");
        assert_eq!(a.version_id(), b.version_id());
    }

    #[test]
    fn canonical_form_sorts_keys() {
        let v: Value = serde_json::from_str(r#"{"b": 1, "a": {"z": [2, 1], "y": 0.5}}"#).unwrap();
        assert_eq!(canonical_json(&v), r#"{"a":{"y":0.5,"z":[2,1]},"b":1}"#);
    }

    #[test]
    fn snapshot_indexes_every_resolvable_collection() {
        let snap = crate::ontology::builtin_snapshot("aerospace").unwrap();
        for name in INDEXED_COLLECTIONS {
            assert!(snap.id_set(name).is_some(), "missing index for {name}");
        }
        assert_eq!(snap.id_set("STATIONS").unwrap().len(), 6);
    }
}
