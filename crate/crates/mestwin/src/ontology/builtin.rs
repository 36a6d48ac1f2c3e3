use super::document::OntologyDocument;
use super::load::{load_document_str, LoadError};
use super::snapshot::{snapshot, OntologySnapshot};

/// Built-in configurations shipped with the crate. The JSON files under
/// `templates/` are the source of truth; they are embedded at compile time
/// so the binary is usable from any working directory.
const TEMPLATES: [(&str, &str); 6] = [
    ("aerospace", include_str!("../../templates/aerospace.json")),
    ("pharma", include_str!("../../templates/pharma.json")),
    ("automotive", include_str!("../../templates/automotive.json")),
    ("electronics", include_str!("../../templates/electronics.json")),
    ("food_beverage", include_str!("../../templates/food_beverage.json")),
    ("warehousing", include_str!("../../templates/warehousing.json")),
];

pub fn template_names() -> Vec<&'static str> {
    TEMPLATES.iter().map(|(name, _)| *name).collect()
}

/// Raw JSON text of one built-in template.
pub fn template_source(template_id: &str) -> Option<&'static str> {
    TEMPLATES
        .iter()
        .find(|(name, _)| *name == template_id)
        .map(|(_, text)| *text)
}

pub fn load_builtin(template_id: &str) -> Result<OntologyDocument, LoadError> {
    let text = template_source(template_id).ok_or_else(|| {
        LoadError::Parse(format!(
            "unknown built-in template '{template_id}' (known: {})",
            template_names().join(", ")
        ))
    })?;
    load_document_str(text)
}

pub fn builtin_snapshot(template_id: &str) -> Result<OntologySnapshot, LoadError> {
    Ok(snapshot(load_builtin(template_id)?, template_id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::{builtin_expected_counts, validate_counts};

    #[test]
    fn all_builtins_load_and_validate() {
        for name in template_names() {
            let doc = load_builtin(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            let expected = builtin_expected_counts(name).unwrap();
            let report = validate_counts(&doc, expected);
            assert!(
                report.all_match(),
                "{name} counts off: {:?}",
                report.mismatches()
            );
        }
    }

    #[test]
    fn unknown_template_is_an_error() {
        assert!(load_builtin("shipyard").is_err());
    }

    #[test]
    fn aerospace_matches_its_published_shape() {
        let doc = load_builtin("aerospace").unwrap();
        assert_eq!(doc.stations.len(), 6);
        assert_eq!(doc.failure_codes.len(), 24);
        let s1 = &doc.stations["S1"];
        assert_eq!(s1.name, "CNC Machining");
        assert_eq!(s1.work_center, "WC-CNC");
        assert_eq!(s1.cycle_time_range_min, (120.0, 480.0));
        assert_eq!(s1.setup_time_min, (30.0, 60.0));
        assert_eq!(s1.first_pass_yield, 0.95);
        assert!(s1.is_quality_gate);
        let s2 = &doc.stations["S2"];
        assert_eq!(s2.name, "Drilling");
        assert_eq!(s2.cycle_time_range_min, (30.0, 90.0));
        assert_eq!(s2.first_pass_yield, 0.96);
    }

    #[test]
    fn pharma_matches_its_published_shape() {
        let doc = load_builtin("pharma").unwrap();
        let s1 = &doc.stations["S1"];
        assert_eq!(s1.name, "Dispensing");
        assert_eq!(s1.work_center, "WC-DISPENSE");
        assert_eq!(s1.cycle_time_range_min, (20.0, 45.0));
        assert_eq!(s1.first_pass_yield, 0.99);
        let s2 = &doc.stations["S2"];
        assert_eq!(s2.name, "Granulation");
        assert_eq!(s2.cycle_time_range_min, (60.0, 180.0));
        assert_eq!(s2.first_pass_yield, 0.96);
        for (id, name) in [("S3", "Blending"), ("S4", "Compression"), ("S5", "Film Coating"), ("S6", "Packaging")] {
            assert_eq!(doc.stations[id].name, name);
        }
    }
}
