use serde::Serialize;

use super::document::OntologyDocument;

/// Structural complexity of one configuration: collection cardinalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComplexityRow {
    pub stations: usize,
    pub products: usize,
    pub failure_codes: usize,
    pub certifications: usize,
    pub inspection_plans: usize,
    pub tool_defs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CountCheck {
    pub metric: &'static str,
    pub expected: usize,
    pub measured: usize,
}

impl CountCheck {
    pub fn matches(&self) -> bool {
        self.expected == self.measured
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CountCheck>,
}

impl ValidationReport {
    pub fn all_match(&self) -> bool {
        self.checks.iter().all(CountCheck::matches)
    }

    pub fn mismatches(&self) -> Vec<&CountCheck> {
        self.checks.iter().filter(|c| !c.matches()).collect()
    }
}

pub fn measure_counts(doc: &OntologyDocument) -> ComplexityRow {
    ComplexityRow {
        stations: doc.stations.len(),
        products: doc.products.len(),
        failure_codes: doc.failure_codes.len(),
        certifications: doc.certifications.len(),
        inspection_plans: doc.inspection_plans.len(),
        tool_defs: doc.tool_definitions.len(),
    }
}

/// Compare a document's measured cardinalities against an expected row.
/// Mismatches are reported, never raised.
pub fn validate_counts(doc: &OntologyDocument, expected: ComplexityRow) -> ValidationReport {
    let measured = measure_counts(doc);
    ValidationReport {
        checks: vec![
            CountCheck { metric: "stations", expected: expected.stations, measured: measured.stations },
            CountCheck { metric: "products", expected: expected.products, measured: measured.products },
            CountCheck { metric: "failure_codes", expected: expected.failure_codes, measured: measured.failure_codes },
            CountCheck { metric: "certifications", expected: expected.certifications, measured: measured.certifications },
            CountCheck { metric: "inspection_plans", expected: expected.inspection_plans, measured: measured.inspection_plans },
            CountCheck { metric: "tool_defs", expected: expected.tool_defs, measured: measured.tool_defs },
        ],
    }
}

/// Expected complexity for each built-in configuration.
pub fn builtin_expected_counts(template_id: &str) -> Option<ComplexityRow> {
    let row = match template_id {
        "aerospace" => ComplexityRow { stations: 6, products: 4, failure_codes: 24, certifications: 6, inspection_plans: 6, tool_defs: 6 },
        "pharma" => ComplexityRow { stations: 6, products: 4, failure_codes: 27, certifications: 6, inspection_plans: 6, tool_defs: 6 },
        "automotive" => ComplexityRow { stations: 6, products: 4, failure_codes: 28, certifications: 6, inspection_plans: 6, tool_defs: 6 },
        "electronics" => ComplexityRow { stations: 6, products: 4, failure_codes: 27, certifications: 6, inspection_plans: 6, tool_defs: 6 },
        "food_beverage" => ComplexityRow { stations: 14, products: 4, failure_codes: 28, certifications: 6, inspection_plans: 14, tool_defs: 8 },
        "warehousing" => ComplexityRow { stations: 6, products: 4, failure_codes: 26, certifications: 6, inspection_plans: 6, tool_defs: 6 },
        _ => return None,
    };
    Some(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::load_builtin;

    #[test]
    fn self_comparison_always_matches() {
        let doc = load_builtin("pharma").unwrap();
        let report = validate_counts(&doc, measure_counts(&doc));
        assert!(report.all_match());
    }

    #[test]
    fn mismatch_is_reported_not_raised() {
        let doc = load_builtin("pharma").unwrap();
        let mut expected = measure_counts(&doc);
        expected.failure_codes += 1;
        let report = validate_counts(&doc, expected);
        assert!(!report.all_match());
        assert_eq!(report.mismatches().len(), 1);
        assert_eq!(report.mismatches()[0].metric, "failure_codes");
    }

    #[test]
    fn food_beverage_row() {
        let doc = load_builtin("food_beverage").unwrap();
        let m = measure_counts(&doc);
        assert_eq!(m.stations, 14);
        assert_eq!(m.failure_codes, 28);
        assert_eq!(m.inspection_plans, 14);
        assert_eq!(m.tool_defs, 8);
    }

    #[test]
    fn pharma_failure_codes() {
        let doc = load_builtin("pharma").unwrap();
        assert_eq!(measure_counts(&doc).failure_codes, 27);
    }
}
