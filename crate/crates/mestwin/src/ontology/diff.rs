use serde::Serialize;
use serde_json::Value;

use super::snapshot::OntologySnapshot;

/// One structural difference between two documents. `path` is a dotted key
/// path rooted at the export name; arrays and scalars are treated as leaves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffEntry {
    pub export: String,
    pub path: String,
    pub before: Option<Value>,
    pub after: Option<Value>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct OntologyDiff {
    pub added: Vec<DiffEntry>,
    pub removed: Vec<DiffEntry>,
    pub changed: Vec<DiffEntry>,
}

impl OntologyDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.changed.is_empty()
    }

    pub fn len(&self) -> usize {
        self.added.len() + self.removed.len() + self.changed.len()
    }
}

/// Structural diff of two snapshots over their canonical forms.
pub fn diff(a: &OntologySnapshot, b: &OntologySnapshot) -> OntologyDiff {
    let mut out = OntologyDiff::default();
    walk(&a.canonical_value(), &b.canonical_value(), "", &mut out);
    out
}

fn export_of(path: &str) -> String {
    path.split('.').next().unwrap_or(path).to_string()
}

fn walk(before: &Value, after: &Value, path: &str, out: &mut OntologyDiff) {
    match (before, after) {
        (Value::Object(a), Value::Object(b)) => {
            for (key, val) in a {
                let child = join(path, key);
                match b.get(key) {
                    Some(other) => walk(val, other, &child, out),
                    None => out.removed.push(DiffEntry {
                        export: export_of(&child),
                        path: child,
                        before: Some(val.clone()),
                        after: None,
                    }),
                }
            }
            for (key, val) in b {
                if !a.contains_key(key) {
                    let child = join(path, key);
                    out.added.push(DiffEntry {
                        export: export_of(&child),
                        path: child,
                        before: None,
                        after: Some(val.clone()),
                    });
                }
            }
        }
        (a, b) if a == b => {}
        (a, b) => out.changed.push(DiffEntry {
            export: export_of(path),
            path: path.to_string(),
            before: Some(a.clone()),
            after: Some(b.clone()),
        }),
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// Apply a diff to a canonical value. `apply_diff(diff(a, b), a) == b` holds
/// for canonical forms.
pub fn apply_diff(base: &Value, diff: &OntologyDiff) -> Value {
    let mut value = base.clone();
    for entry in &diff.removed {
        remove_at(&mut value, &entry.path);
    }
    for entry in diff.added.iter().chain(&diff.changed) {
        if let Some(after) = &entry.after {
            set_at(&mut value, &entry.path, after.clone());
        }
    }
    value
}

fn set_at(root: &mut Value, path: &str, new: Value) {
    let mut current = root;
    let segments: Vec<&str> = path.split('.').collect();
    for segment in &segments[..segments.len() - 1] {
        current = current
            .as_object_mut()
            .expect("diff paths traverse objects")
            .entry(segment.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    current
        .as_object_mut()
        .expect("diff paths traverse objects")
        .insert(segments[segments.len() - 1].to_string(), new);
}

fn remove_at(root: &mut Value, path: &str) {
    let mut current = root;
    let segments: Vec<&str> = path.split('.').collect();
    for segment in &segments[..segments.len() - 1] {
        match current.get_mut(*segment) {
            Some(next) => current = next,
            None => return,
        }
    }
    if let Some(obj) = current.as_object_mut() {
        obj.remove(segments[segments.len() - 1]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::{builtin_snapshot, canonical_json};

    #[test]
    fn diff_of_a_snapshot_with_itself_is_empty() {
        let a = builtin_snapshot("aerospace").unwrap();
        assert!(diff(&a, &a).is_empty());
    }

    #[test]
    fn aerospace_vs_pharma_changes_station_names() {
        let a = builtin_snapshot("aerospace").unwrap();
        let b = builtin_snapshot("pharma").unwrap();
        let d = diff(&a, &b);
        let s4 = d
            .changed
            .iter()
            .find(|e| e.path == "STATIONS.S4.name")
            .expect("S4 name should differ");
        assert_eq!(s4.export, "STATIONS");
        assert_eq!(s4.before, Some(Value::String("Bonding".into())));
        assert_eq!(s4.after, Some(Value::String("Compression".into())));
    }

    #[test]
    fn apply_diff_round_trips() {
        for (a, b) in [("aerospace", "pharma"), ("electronics", "food_beverage"), ("automotive", "warehousing")] {
            let sa = builtin_snapshot(a).unwrap();
            let sb = builtin_snapshot(b).unwrap();
            let patched = apply_diff(&sa.canonical_value(), &diff(&sa, &sb));
            assert_eq!(
                canonical_json(&patched),
                canonical_json(&sb.canonical_value()),
                "{a} -> {b}"
            );
        }
    }
}
