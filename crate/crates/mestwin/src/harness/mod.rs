//! Reproduction harness for the two studies: the 72-query tool-call
//! fabrication experiment across both constraint modes, and the KPI
//! calibration study over many seeds. A pluggable model-client port with a
//! deterministic mock fabricator stands in for a live model.

mod calibration;
mod client;
mod experiment;
mod queries;
mod stats;
mod synthetic;

pub use calibration::{
    extract_kpis, render_calibration, run_calibration, CalibrationReport, Kpi, KpiStat, RunKpis,
    CALIBRATION_BASE_SEED,
};
pub use client::{
    parse_http_endpoint, ClientError, LiveHttpClient, MockFabricator, ModelClient, PlannedCall,
    DEFAULT_CLIENT_SEED, DEFAULT_FABRICATION_PROBABILITY,
};
pub use experiment::{
    classify, provision_all, render_report, run_experiment, run_experiment_with_cases,
    standard_query_set, ConditionReport, ConfigFixture, ConfigRow, DomainRow, ExperimentReport,
    HarnessError, OutcomeClass, QueryRecord,
};
pub use queries::{fabrication_lexicon, queries_for, QueryCase};
pub use stats::{betai, ci95, ln_gamma, mean, sample_sd, t_quantile};
pub use synthetic::{DecompositionStats, RecursiveAgent};
