//! Ontology-grounded digital-twin MES analytics.
//!
//! A declarative plant ontology (45 required keys per document) is validated
//! at load, drives a deterministic 1-minute-tick discrete-event simulator
//! that emits MES-shaped CDC records, and is enforced at tool-call time by a
//! resolve/contextualize/annotate contract so that no fabricated entity
//! identifier ever reaches the warehouse.
//!
//! Layering, bottom to top:
//!
//! - [`ontology`]: document loading, validation, snapshots, diffs
//! - [`contract`]: entity resolution and context assembly over a snapshot
//! - [`sim`]: seed-data generator and discrete-event engine
//! - [`warehouse`]: CDC ingest and the 14/8/1 star schema over a storage port
//! - [`tools`]: the 12 parameterized analytics tools
//! - [`orchestrator`]: sessions, parameter gate, circuit breaker
//! - [`server`]: JSON-RPC tool discovery and invocation transport
//! - [`harness`]: hallucination experiment and calibration studies

pub mod contract;
pub mod harness;
pub mod ontology;
pub mod orchestrator;
pub mod server;
pub mod sim;
pub mod tools;
pub mod warehouse;

pub mod cli;
