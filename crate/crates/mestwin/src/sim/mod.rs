//! Deterministic discrete-event engine with 1-minute tick resolution.
//!
//! A run is a pure function of (snapshot, seed, days, disruption profile):
//! the seed-data generator creates the reference entities, then the tick loop
//! advances a prioritized per-tick sequence (disruption handling, daily
//! order creation, operation advancement, equipment status, quality
//! inspection, planning revisions) and emits a causally ordered CDC stream.

mod calendar;
mod engine;
mod events;
mod profile;
mod rng;
mod seed;

pub use calendar::{FactoryCalendar, SIM_EPOCH};
pub use engine::{evaluate_gates_for_test, run_simulation, GateResult, RunSummary};
pub use events::{CdcOp, CdcRecord, EventLog};
pub use profile::DisruptionProfile;
pub use rng::{poisson, stream, triangular_unit, uniform_f64, uniform_u32, weighted_index};
pub use seed::{generate_seed_entities, SeedDataset};
